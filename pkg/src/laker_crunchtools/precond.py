"""Learned preconditioner for the attention kernel system.

Random directions are pushed through lambda I + G and normalized; a
shrinkage-regularized CCCP fixed-point iteration then estimates the shape
matrix Sigma of those directions, and the preconditioner is
P = Sigma^{-1/2}. The estimate is kept trace-normalized (tr = n) so the
iteration stays on a compact set.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import (
    DegenerateDirectionError,
    DimensionMismatchError,
    InvalidConfigError,
    MaxItersExceededError,
)
from .kernel import AttentionKernelSystem
from .linalg import (
    FloatArray,
    as_symmetric,
    cholesky_lower,
    min_eigenvalue,
    spd_inv_sqrt,
)
from .models import CccpConfig

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-300
MAX_RESAMPLES = 8
MIN_EIG_TRIGGER = 1e-6
RHO_EIG_FLOOR = 0.2
RHO_CAP = 0.9


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Unit directions u_k stored as the columns of an (n, N_r) array."""

    directions: FloatArray
    resamples: int = 0

    @property
    def n(self) -> int:
        return int(self.directions.shape[0])

    @property
    def count(self) -> int:
        return int(self.directions.shape[1])


@dataclass(frozen=True, eq=False)
class SigmaEstimate:
    """An SPD shape estimate; `scale` is tr(Sigma~)/n before normalization."""

    sigma: FloatArray
    scale: float = 1.0


@dataclass
class CccpReport:
    iterations: int
    final_fp_residual: float
    rho_used: float
    nr_used: int
    min_eig_sigma: float
    converged: bool
    resamples: int = 0
    objective_history: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """P = Sigma*^{-1/2} together with the run that produced it."""

    matrix: FloatArray
    source_report: CccpReport | None = None
    sigma: FloatArray | None = None

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, v: FloatArray) -> FloatArray:
        if v.shape[0] != self.n:
            raise DimensionMismatchError("preconditioner input", (self.n,), v.shape)
        return np.asarray(self.matrix @ v, dtype=np.float64)


def nr_schedule(n: int) -> int:
    """Number of random directions for an n-dimensional system.

    Grows like 8 sqrt(n) for small n and n/4 for large n, capped at n.
    """
    if n < 1:
        raise InvalidConfigError(f"n must be positive, got {n}")
    return min(n, max(math.ceil(8 * math.sqrt(n)), math.ceil(n / 4)))


def _direction_rng(seed: int, index: int, attempt: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(index, attempt))
    return np.random.Generator(np.random.Philox(ss))


def sample_directions(
    system: AttentionKernelSystem, n_directions: int, seed: int
) -> DirectionSet:
    """Draw z_k ~ N(0, I_n), map u_k = (lambda I + G) z_k and normalize.

    Direction k draws from its own counter-based stream and is mapped on its
    own, so raising n_directions leaves the earlier directions bitwise unchanged. A direction whose
    image has norm below 1e-300 is redrawn from the next stream.

    Raises:
        InvalidConfigError: If n_directions < 1
        DegenerateDirectionError: If a direction stays degenerate after 8 redraws
    """
    if n_directions < 1:
        raise InvalidConfigError(f"n_directions must be positive, got {n_directions}")
    n = system.n
    # One matvec per column; a block product is not bitwise stable in n_directions.
    U = np.empty((n, n_directions))
    for k in range(n_directions):
        U[:, k] = system.apply(_direction_rng(seed, k, 0).standard_normal(n))
    norms = np.linalg.norm(U, axis=0)

    resamples = 0
    for k in np.flatnonzero(norms < DEGENERATE_NORM):
        for attempt in range(1, MAX_RESAMPLES + 1):
            resamples += 1
            u = system.apply(_direction_rng(seed, int(k), attempt).standard_normal(n))
            norm = float(np.linalg.norm(u))
            if norm >= DEGENERATE_NORM:
                U[:, k] = u
                norms[k] = norm
                break
        else:
            raise DegenerateDirectionError(int(k), MAX_RESAMPLES)
    if resamples:
        logger.warning("Resampled %d degenerate direction(s)", resamples)

    return DirectionSet(directions=U / norms, resamples=resamples)


def rho_schedule(
    n_directions: int,
    n: int,
    gamma: float,
    min_eig_sigma: float,
    rho_floor: float = 1e-3,
) -> float:
    """Shrinkage weight for the current iteration.

    The floor applies when directions span the space; otherwise rho grows
    with the undersampling 1 - N_r/n, modulated by gamma, capped at 0.9. A
    collapsing smallest eigenvalue forces rho to at least 0.2.
    """
    if n_directions >= n:
        rho = rho_floor
    else:
        rho = rho_floor + 0.5 * (1.0 - n_directions / n) * min(1.0, 10.0 * gamma)
        rho = min(max(rho, rho_floor), RHO_CAP)
    if min_eig_sigma < MIN_EIG_TRIGGER:
        rho = max(rho, RHO_EIG_FLOOR)
    return rho


def _sigma_matrix(sigma: SigmaEstimate | FloatArray) -> FloatArray:
    if isinstance(sigma, SigmaEstimate):
        return sigma.sigma
    return np.asarray(sigma, dtype=np.float64)


def cccp_step(
    sigma: SigmaEstimate | FloatArray,
    directions: DirectionSet,
    cfg: CccpConfig,
    rho: float,
) -> SigmaEstimate:
    """One shrinkage-regularized CCCP update followed by trace normalization.

    Computes F = ((n/N_r) sum_k u_k u_k^T / (u_k^T Sigma^{-1} u_k + eps)
    + gamma I) / (1 + gamma/n), shrinks to (1 - rho) F + rho I and rescales
    to trace n. Sigma^{-1} enters only through one Cholesky factor.

    Raises:
        NotPositiveDefiniteError: If Sigma fails Cholesky
        DimensionMismatchError: If Sigma and the directions disagree on n
    """
    S_t = _sigma_matrix(sigma)
    n = directions.n
    if S_t.shape != (n, n):
        raise DimensionMismatchError("covariance estimate", (n, n), S_t.shape)
    if not 0.0 <= rho <= 1.0:
        raise InvalidConfigError(f"rho must be in [0, 1], got {rho}")

    U = directions.directions
    L = cholesky_lower(S_t, "covariance estimate")
    W = sla.solve_triangular(L, U, lower=True, check_finite=False)
    quad = np.sum(W * W, axis=0)

    weights = (n / directions.count) / (quad + cfg.epsilon)
    F = (U * weights) @ U.T
    F[np.diag_indices(n)] += cfg.gamma
    F /= 1.0 + cfg.gamma / n

    shrunk = (1.0 - rho) * F
    shrunk[np.diag_indices(n)] += rho
    scale = float(np.trace(shrunk)) / n
    nxt = shrunk / scale
    return SigmaEstimate(
        sigma=np.asarray(0.5 * (nxt + nxt.T), dtype=np.float64),
        scale=scale,
    )


def mle_objective(
    sigma: SigmaEstimate | FloatArray, directions: DirectionSet, gamma: float
) -> float:
    """Regularized negative log-likelihood of the directions under Sigma.

    -(1 + gamma/n) log det Theta + (n/N_r) sum_k log(u_k^T Theta u_k)
    + gamma tr(Theta), with Theta = Sigma^{-1}.
    """
    S = _sigma_matrix(sigma)
    n = directions.n
    L = cholesky_lower(S, "covariance estimate")
    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(L))))
    W = sla.solve_triangular(L, directions.directions, lower=True, check_finite=False)
    quad = np.sum(W * W, axis=0)
    L_inv = sla.solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    trace_theta = float(np.sum(L_inv * L_inv))
    return (
        (1.0 + gamma / n) * logdet_sigma
        + (n / directions.count) * float(np.sum(np.log(quad)))
        + gamma * trace_theta
    )


def run_cccp(
    directions: DirectionSet, cfg: CccpConfig
) -> tuple[SigmaEstimate, CccpReport]:
    """Iterate cccp_step from Sigma_0 = I to a fixed point.

    rho follows rho_schedule and never decreases across iterations so the
    fixed-point map does not switch back and forth. The smallest eigenvalue
    is bounded below by rho / scale; an eigensolve runs only when that bound
    falls under the trigger.

    Returns:
        The estimate with the smallest fixed-point residual and its report

    Raises:
        MaxItersExceededError: If cfg.strict and max_iters is reached
    """
    n = directions.n
    n_dir = directions.count
    sigma = np.eye(n)
    min_eig = 1.0
    rho = 0.0
    best: SigmaEstimate | None = None
    best_residual = math.inf
    best_rho = rho
    history: list[float] = []
    residual = math.inf
    iterations = 0

    for iterations in range(1, cfg.max_iters + 1):
        rho = max(rho, rho_schedule(n_dir, n, cfg.gamma, min_eig, cfg.rho_floor))
        est = cccp_step(sigma, directions, cfg, rho)
        bound = rho / est.scale
        min_eig = bound if bound >= MIN_EIG_TRIGGER else min_eigenvalue(est.sigma)
        residual = float(np.linalg.norm(est.sigma - sigma) / np.linalg.norm(sigma))
        if cfg.track_objective:
            history.append(mle_objective(est, directions, cfg.gamma))
        logger.debug("CCCP iter %d: residual=%.3e rho=%.4f", iterations, residual, rho)

        sigma = est.sigma
        if residual < best_residual:
            best, best_residual, best_rho = est, residual, rho
        if residual <= cfg.fp_tol:
            break

    assert best is not None
    converged = best_residual <= cfg.fp_tol
    if not converged:
        if cfg.strict:
            raise MaxItersExceededError("CCCP fixed-point iteration", cfg.max_iters)
        logger.warning(
            "CCCP reached max_iters=%d with residual %.3e; using best iterate",
            cfg.max_iters, best_residual,
        )

    report = CccpReport(
        iterations=iterations,
        final_fp_residual=best_residual,
        rho_used=best_rho,
        nr_used=n_dir,
        min_eig_sigma=min_eigenvalue(best.sigma),
        converged=converged,
        resamples=directions.resamples,
        objective_history=history,
    )
    logger.info(
        "CCCP n=%d N_r=%d: %d iterations, residual %.3e, rho %.4f",
        n, n_dir, iterations, best_residual, best_rho,
    )
    return best, report


def learn_preconditioner(
    system: AttentionKernelSystem, cfg: CccpConfig | None = None
) -> tuple[Preconditioner, CccpReport]:
    """Learn P = Sigma*^{-1/2} for lambda I + G.

    Args:
        system: The regularized kernel system
        cfg: CCCP settings; N_r defaults to nr_schedule(n)

    Returns:
        Tuple of (preconditioner, CCCP report)

    Raises:
        MaxItersExceededError: If cfg.strict and the iteration does not settle
        NotPositiveDefiniteError: If the estimate loses definiteness
    """
    cfg = cfg or CccpConfig()
    n_dir = cfg.n_directions if cfg.n_directions is not None else nr_schedule(system.n)
    directions = sample_directions(system, n_dir, cfg.seed)
    estimate, report = run_cccp(directions, cfg)
    matrix = spd_inv_sqrt(estimate.sigma)
    return Preconditioner(matrix=matrix, source_report=report, sigma=estimate.sigma), report


def preconditioner_from_matrix(P: object) -> Preconditioner:
    """Wrap an explicit SPD matrix (for example A^{-1}) as a Preconditioner."""
    return Preconditioner(matrix=as_symmetric(P, "preconditioner"))
