"""Exponential attention kernel and the regularized regression system.

Positions are mapped to embeddings by a seeded random Fourier feature map,
the kernel is G = exp(E E^T) taken elementwise, and the regression system
is (lambda I + G) alpha = y. Solvers only touch the system through
AttentionKernelSystem.apply, so the dense G could later be swapped for a
matrix-free operator.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .errors import DimensionMismatchError, InvalidConfigError, ValidationError
from .linalg import FloatArray, as_symmetric, as_vector
from .models import EmbeddingConfig

logger = logging.getLogger(__name__)

EMBEDDING_NORM_CAP = 1.0


@dataclass(frozen=True)
class FeatureMap:
    """Calibrated Fourier feature map e(x) = s * phi(x)/|phi(x)| + m * 1/sqrt(d_e)."""

    frequencies: FloatArray
    phases: FloatArray
    scale: float
    offset: float

    @property
    def d_e(self) -> int:
        return 2 * int(self.frequencies.shape[0])

    def raw_features(self, X: FloatArray) -> FloatArray:
        """Unit-normalized sin/cos features, shape (n, d_e).

        The phase is built with broadcasting rather than a matrix product so
        each row depends only on its own position.
        """
        W = self.frequencies
        theta = X[:, 0:1] * W[:, 0] + X[:, 1:2] * W[:, 1] + self.phases
        phi = np.concatenate([np.sin(theta), np.cos(theta)], axis=1)
        norms = np.sqrt(np.sum(phi * phi, axis=1, keepdims=True))
        return np.asarray(phi / norms, dtype=np.float64)

    def __call__(self, X: FloatArray) -> FloatArray:
        phi = self.raw_features(X)
        E = self.scale * phi + self.offset / np.sqrt(self.d_e)
        norms = np.sqrt(np.sum(E * E, axis=1, keepdims=True))
        return np.asarray(E / np.maximum(norms / EMBEDDING_NORM_CAP, 1.0), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Row i is the embedding e_i of position x_i."""

    entries: FloatArray
    config: EmbeddingConfig | None = None

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def d_e(self) -> int:
        return int(self.entries.shape[1])


@dataclass(frozen=True, eq=False)
class AttentionKernelSystem:
    """The regularized operator lambda I + G with matvec access.

    Any finite symmetric G is accepted here so that analytic operators
    (identity, diagonal) can stand in for a kernel; build_system enforces
    the attention-kernel invariants.
    """

    G: FloatArray
    lam: float
    _diag: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        G = as_symmetric(self.G, "kernel matrix")
        if not self.lam > 0:
            raise InvalidConfigError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "_diag", self.lam + np.diag(G).copy())

    @property
    def n(self) -> int:
        return int(self.G.shape[0])

    def apply(self, v: FloatArray) -> FloatArray:
        """Return (lambda I + G) v for a vector or a block of column vectors."""
        if v.shape[0] != self.n:
            raise DimensionMismatchError("operator input", (self.n,), v.shape)
        return np.asarray(self.lam * v + self.G @ v, dtype=np.float64)

    def apply_kernel(self, v: FloatArray) -> FloatArray:
        """Return G v."""
        if v.shape[0] != self.n:
            raise DimensionMismatchError("kernel input", (self.n,), v.shape)
        return np.asarray(self.G @ v, dtype=np.float64)

    def diagonal(self) -> FloatArray:
        """Diagonal of lambda I + G."""
        return self._diag.copy()

    def dense(self) -> FloatArray:
        """Explicit lambda I + G."""
        return np.asarray(self.G + self.lam * np.eye(self.n), dtype=np.float64)


def _as_positions(X: object, domain_size: float) -> FloatArray:
    P = np.asarray(X, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 2:
        raise DimensionMismatchError("positions", "(n, 2)", P.shape)
    if P.shape[0] == 0:
        raise ValidationError("positions must not be empty")
    if not np.all(np.isfinite(P)):
        raise ValidationError("positions have non-finite coordinates")
    if P.min() < 0 or P.max() > domain_size:
        raise ValidationError(f"positions must lie in [0, {domain_size}]^2")
    return P


def _mean_pairwise_affinity(E: FloatArray) -> float:
    """Mean of <e_i, e_j> over distinct pairs."""
    N = E.shape[0]
    total = E.sum(axis=0)
    off_diag = float(total @ total) - float(np.sum(E * E))
    return off_diag / (N * (N - 1))


@lru_cache(maxsize=32)
def feature_map(cfg: EmbeddingConfig) -> FeatureMap:
    """Draw and calibrate the feature map for a config.

    Frequencies come from N(0, length_scale^-2 I_2) and phases from
    U[0, 2 pi), both from a Philox stream keyed by cfg.seed. The affine
    scalars (s, m) satisfy s + m <= 1, which caps every row norm at 1, and
    put the mean pairwise affinity over a Halton calibration set at the target.

    Raises:
        InvalidConfigError: If d_e is odd.
    """
    if cfg.d_e % 2:
        raise InvalidConfigError(f"d_e must be even (sin/cos pairs), got {cfg.d_e}")
    half = cfg.d_e // 2
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    frequencies = rng.normal(0.0, 1.0 / cfg.length_scale, size=(half, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=half)

    calibration = qmc.Halton(d=2, scramble=False).random(cfg.calibration_points) * cfg.domain_size
    unscaled = FeatureMap(frequencies, phases, 1.0, 0.0)
    phi = unscaled.raw_features(calibration)
    ones = np.full(cfg.d_e, 1.0 / np.sqrt(cfg.d_e))
    target = cfg.target_mean_affinity

    def affinity(m: float) -> float:
        return _mean_pairwise_affinity((1.0 - m) * phi + m * ones)

    base = affinity(0.0)
    if base < target:
        offset = float(brentq(lambda m: affinity(m) - target, 0.0, 1.0, xtol=1e-12))
        scale = 1.0 - offset
    else:
        offset = 0.0
        scale = float(np.sqrt(target / base))

    logger.debug(
        "Calibrated feature map d_e=%d seed=%d: scale=%.4f offset=%.4f (calibration mean %.4f)",
        cfg.d_e, cfg.seed, scale, offset, base,
    )
    return FeatureMap(frequencies, phases, scale, offset)


def embed_positions(X: object, cfg: EmbeddingConfig) -> EmbeddingMatrix:
    """Map positions in the square domain to attention embeddings.

    Args:
        X: Positions, shape (n, 2), inside [0, domain_size]^2
        cfg: Embedding configuration

    Returns:
        EmbeddingMatrix with rows of norm at most 1

    Raises:
        InvalidConfigError: If cfg.d_e is odd
        ValidationError: If positions are empty or outside the domain
    """
    fmap = feature_map(cfg)
    P = _as_positions(X, cfg.domain_size)
    return EmbeddingMatrix(entries=fmap(P), config=cfg)


def _entries(E: EmbeddingMatrix | FloatArray) -> FloatArray:
    M = E.entries if isinstance(E, EmbeddingMatrix) else np.asarray(E, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatchError("embeddings", "(n, d_e)", M.shape)
    if not np.all(np.isfinite(M)):
        raise ValidationError("embeddings have non-finite entries")
    return M


def attention_kernel(E: EmbeddingMatrix | FloatArray) -> FloatArray:
    """G_ij = exp(<e_i, e_j>)."""
    M = _entries(E)
    K = M @ M.T
    return np.asarray(np.exp(0.5 * (K + K.T)), dtype=np.float64)


def cross_kernel(E_train: EmbeddingMatrix | FloatArray, e_query: FloatArray) -> FloatArray:
    """Kernel values exp(<e_query, e_i>) against every training embedding."""
    M = _entries(E_train)
    q = np.asarray(e_query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != M.shape[1]:
        raise DimensionMismatchError("query embedding", (M.shape[1],), q.shape)
    return np.asarray(np.exp(M @ q), dtype=np.float64)


def cross_kernel_matrix(
    E_train: EmbeddingMatrix | FloatArray, E_query: EmbeddingMatrix | FloatArray
) -> FloatArray:
    """Kernel block exp(E_query E_train^T), shape (m, n)."""
    M = _entries(E_train)
    Q = _entries(E_query)
    if Q.shape[1] != M.shape[1]:
        raise DimensionMismatchError("query embeddings", (Q.shape[0], M.shape[1]), Q.shape)
    return np.asarray(np.exp(Q @ M.T), dtype=np.float64)


def build_system(E: EmbeddingMatrix | FloatArray, lam: float) -> AttentionKernelSystem:
    """Assemble lambda I + G from embeddings.

    Raises:
        ValidationError: If any kernel entry is not strictly positive
    """
    G = attention_kernel(E)
    if not np.all(G > 0):
        raise ValidationError("attention kernel has non-positive entries")
    system = AttentionKernelSystem(G=G, lam=lam)
    logger.debug("Built attention system n=%d lambda=%.3g", system.n, lam)
    return system


def operator_apply(system: AttentionKernelSystem, v: object) -> FloatArray:
    """Return lambda v + G v."""
    return system.apply(as_vector(v, system.n, "operator input"))


def objective_from_fit(
    fit: FloatArray, alpha: FloatArray, y: FloatArray, lam: float
) -> float:
    """R(alpha) given the fitted values G alpha."""
    r = fit - y
    return float(r @ r + lam * (alpha @ fit))


def objective(system: AttentionKernelSystem, alpha: object, y: object) -> float:
    """Regression objective R(alpha) = |G alpha - y|^2 + lambda alpha^T G alpha."""
    a = as_vector(alpha, system.n, "alpha")
    b = as_vector(y, system.n, "y")
    return objective_from_fit(system.apply_kernel(a), a, b, system.lam)


def objective_gradient(system: AttentionKernelSystem, alpha: object, y: object) -> FloatArray:
    """Gradient 2 G ((G + lambda I) alpha - y) of the regression objective."""
    a = as_vector(alpha, system.n, "alpha")
    b = as_vector(y, system.n, "y")
    return 2.0 * system.apply_kernel(system.apply(a) - b)


def clustered_embeddings(
    n: int,
    clusters: int,
    d_e: int = 10,
    radius: float = 0.99,
    spread: float = 1e-6,
    seed: int = 0,
) -> EmbeddingMatrix:
    """Embeddings forming well-separated, nearly identical clusters.

    Cluster centers are the vertices of a regular simplex (pairwise inner
    product -1/(Q-1)) scaled to `radius`; each point is its center plus
    N(0, spread^2) jitter. Points are assigned to clusters in contiguous
    blocks.

    Raises:
        InvalidConfigError: If clusters is not in [1, min(n, d_e)]
    """
    if clusters < 1 or clusters > min(n, d_e):
        raise InvalidConfigError(f"clusters must be in [1, {min(n, d_e)}], got {clusters}")
    if clusters == 1:
        centers = np.zeros((1, d_e))
        centers[0, 0] = 1.0
    else:
        simplex = np.eye(clusters) - 1.0 / clusters
        simplex /= np.linalg.norm(simplex, axis=1, keepdims=True)
        centers = np.zeros((clusters, d_e))
        centers[:, :clusters] = simplex
    centers *= radius

    labels = np.minimum(np.arange(n) * clusters // n, clusters - 1)
    rng = np.random.Generator(np.random.Philox(seed))
    E = centers[labels] + spread * rng.standard_normal((n, d_e))
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    E = E / np.maximum(norms / EMBEDDING_NORM_CAP, 1.0)
    return EmbeddingMatrix(entries=np.asarray(E, dtype=np.float64))
