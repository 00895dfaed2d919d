"""Radio-map side of the toolkit.

Synthetic received-signal-strength fields, noisy point measurements,
reconstruction of a grid map from kernel coefficients, the rational
quadratic Gaussian-process baseline, and the evaluation metrics. All
values are in dBm.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg as sla

from .errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    OutputError,
    ValidationError,
    ZeroDenominatorError,
)
from .kernel import (
    AttentionKernelSystem,
    EmbeddingMatrix,
    cross_kernel_matrix,
    embed_positions,
    objective_from_fit,
)
from .linalg import FloatArray, as_vector
from .models import EmbeddingConfig, FieldConfig, GprtConfig, GridSpec
from .solvers import SolveReport

logger = logging.getLogger(__name__)

MAP_CSV_COLUMNS = ["row", "col", "x", "y", "value_dbm"]
GPRT_LENGTH_GRID = (10.0, 20.0, 40.0)
GPRT_NOISE_GRID = (0.5, 2.25, 4.0)


@dataclass(frozen=True, eq=False)
class RadioFieldModel:
    """Transmitters with log-distance path loss plus a smooth shadowing field.

    r(x) = 10 log10(sum_t P_t / (1 + |x - x_t|)^eta) + s(x), with s a sum of
    random-phase cosines.
    """

    tx_positions: FloatArray
    tx_powers_mw: FloatArray
    path_loss_exponent: float
    shadow_wavevectors: FloatArray
    shadow_phases: FloatArray
    shadow_amplitude: float
    domain_size: float = 100.0

    @property
    def n_transmitters(self) -> int:
        return int(self.tx_positions.shape[0])


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    positions: FloatArray
    values: FloatArray
    noise_std: float
    truth: FloatArray | None = None

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class RadioMap:
    """Map values on a GridSpec, flattened row-major."""

    grid: GridSpec
    values: FloatArray

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.size,):
            raise DimensionMismatchError("radio map", (self.grid.size,), self.values.shape)

    def as_grid(self) -> FloatArray:
        return self.values.reshape(self.grid.rows, self.grid.cols)

    def to_frame(self) -> pd.DataFrame:
        rows, cols = np.divmod(np.arange(self.grid.size), self.grid.cols)
        pts = self.grid.points()
        return pd.DataFrame(
            {
                "row": rows,
                "col": cols,
                "x": pts[:, 0],
                "y": pts[:, 1],
                "value_dbm": self.values,
            },
            columns=MAP_CSV_COLUMNS,
        )

    def to_csv(self, path: Path) -> Path:
        """Write the map as CSV with header row,col,x,y,value_dbm.

        Raises:
            OutputError: If the file cannot be written
        """
        try:
            self.to_frame().to_csv(path, index=False, lineterminator="\n")
        except OSError as e:
            raise OutputError(str(path), e.strerror or type(e).__name__) from e
        return path


@dataclass
class MetricsRecord:
    obj_gap: float | None = None
    residual: float | None = None
    pred_disc: float | None = None
    rmse: float | None = None
    nmse: float | None = None
    kappa_raw: float | None = None
    kappa_precond: float | None = None
    kappa_jacobi: float | None = None
    iters_to_target: int | None = None
    iterations: int | None = None
    solver_time_s: float | None = None
    precond_time_s: float | None = None


def generate_field(cfg: FieldConfig, seed: int) -> RadioFieldModel:
    """Draw transmitters and a shadowing field.

    Positions are uniform on the domain, powers log-uniform over
    [power_dbm_min, power_dbm_min + power_range_db] dBm and shadowing
    wavevectors N(0, shadowing_corr_m^-2 I) with amplitude
    shadowing_std_db * sqrt(2 / waves) so s(x) has the configured std.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    size = cfg.domain_size
    positions = rng.uniform(0.0, size, size=(cfg.n_transmitters, 2))
    powers_dbm = cfg.power_dbm_min + cfg.power_range_db * rng.uniform(size=cfg.n_transmitters)
    wavevectors = rng.normal(0.0, 1.0 / cfg.shadowing_corr_m, size=(cfg.shadowing_waves, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=cfg.shadowing_waves)
    return RadioFieldModel(
        tx_positions=positions,
        tx_powers_mw=10.0 ** (powers_dbm / 10.0),
        path_loss_exponent=cfg.path_loss_exponent,
        shadow_wavevectors=wavevectors,
        shadow_phases=phases,
        shadow_amplitude=cfg.shadowing_std_db * math.sqrt(2.0 / cfg.shadowing_waves),
        domain_size=size,
    )


def field_values(model: RadioFieldModel, X: object) -> FloatArray:
    """Field r(x) in dBm at each row of X, shape (m, 2)."""
    P = np.asarray(X, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 2:
        raise DimensionMismatchError("positions", "(m, 2)", P.shape)
    dist = np.linalg.norm(P[:, None, :] - model.tx_positions[None, :, :], axis=2)
    received = np.sum(model.tx_powers_mw / (1.0 + dist) ** model.path_loss_exponent, axis=1)
    values = 10.0 * np.log10(received)
    if model.shadow_amplitude > 0:
        W = model.shadow_wavevectors
        phase = P[:, 0:1] * W[:, 0] + P[:, 1:2] * W[:, 1] + model.shadow_phases
        values = values + model.shadow_amplitude * np.sum(np.cos(phase), axis=1)
    return np.asarray(values, dtype=np.float64)


def field_value(model: RadioFieldModel, x: object) -> float:
    """Field r(x) in dBm at a single position."""
    point = np.asarray(x, dtype=np.float64)
    if point.shape != (2,):
        raise DimensionMismatchError("position", (2,), point.shape)
    return float(field_values(model, point[None, :])[0])


def sample_measurements(
    model: RadioFieldModel, n: int, noise_std: float, seed: int
) -> MeasurementSet:
    """n uniform positions with y_i = r(x_i) + N(0, noise_std^2)."""
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    if noise_std < 0:
        raise ValidationError(f"noise_std must be non-negative, got {noise_std}")
    rng = np.random.Generator(np.random.Philox(seed))
    positions = rng.uniform(0.0, model.domain_size, size=(n, 2))
    truth = field_values(model, positions)
    values = truth + noise_std * rng.standard_normal(n) if noise_std > 0 else truth.copy()
    return MeasurementSet(positions=positions, values=values, noise_std=noise_std, truth=truth)


def truth_map(model: RadioFieldModel, grid: GridSpec) -> RadioMap:
    return RadioMap(grid=grid, values=field_values(model, grid.points()))


def predict(
    E_train: EmbeddingMatrix | FloatArray, alpha: object, E_query: EmbeddingMatrix | FloatArray
) -> FloatArray:
    """r_hat(x) = sum_i G(x, x_i) alpha_i for each query embedding."""
    K = cross_kernel_matrix(E_train, E_query)
    a = as_vector(alpha, K.shape[1], "alpha")
    return np.asarray(K @ a, dtype=np.float64)


def reconstruct_map(
    E_train: EmbeddingMatrix | FloatArray,
    alpha: object,
    grid: GridSpec,
    embed_cfg: EmbeddingConfig,
) -> RadioMap:
    """Predict the field on every grid point from kernel coefficients.

    Grid points go through the same feature map as the training positions.

    Raises:
        DimensionMismatchError: If len(alpha) differs from the training size
    """
    E_grid = embed_positions(grid.points(), embed_cfg)
    return RadioMap(grid=grid, values=predict(E_train, alpha, E_grid))


def rq_kernel(XA: FloatArray, XB: FloatArray, cfg: GprtConfig) -> FloatArray:
    """Anisotropic rational quadratic kernel (1 + d^2 / (2 a))^-a.

    d^2 is the squared distance with each axis divided by its length scale.
    """
    scale = np.asarray(cfg.length_scale, dtype=np.float64)
    diff = (XA[:, None, :] - XB[None, :, :]) / scale
    d2 = np.sum(diff * diff, axis=2)
    return np.asarray((1.0 + d2 / (2.0 * cfg.rq_alpha)) ** (-cfg.rq_alpha), dtype=np.float64)


def gprt_fit_predict(
    X: object, y: object, grid: GridSpec, cfg: GprtConfig | None = None
) -> RadioMap:
    """Zero-mean GP posterior mean k(x, X) (K + noise_var I)^-1 y on the grid.

    Raises:
        NotPositiveDefiniteError: If K + noise_var I fails Cholesky
    """
    cfg = cfg or GprtConfig()
    P = np.asarray(X, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] == 0:
        raise DimensionMismatchError("GP training positions", "(n, 2)", P.shape)
    b = as_vector(y, P.shape[0], "GP targets")
    K = rq_kernel(P, P, cfg)
    K[np.diag_indices_from(K)] += cfg.noise_var
    try:
        factor = sla.cho_factor(K, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError("GP covariance", f"noise_var = {cfg.noise_var}") from e
    beta = sla.cho_solve(factor, b, check_finite=False)
    values = rq_kernel(grid.points(), P, cfg) @ beta
    return RadioMap(grid=grid, values=np.asarray(values, dtype=np.float64))


def map_errors(map_hat: RadioMap, truth: RadioMap) -> tuple[float, float]:
    """(RMSE, NMSE) of a map against the ground truth grid.

    Raises:
        ZeroDenominatorError: If the truth map is identically zero
    """
    if map_hat.values.shape != truth.values.shape:
        raise DimensionMismatchError("radio map", truth.values.shape, map_hat.values.shape)
    err = map_hat.values - truth.values
    sse = float(err @ err)
    energy = float(truth.values @ truth.values)
    if energy == 0:
        raise ZeroDenominatorError("NMSE")
    return math.sqrt(sse / truth.values.size), sse / energy


def tune_gprt(
    X: object,
    y: object,
    grid: GridSpec,
    truth: RadioMap,
    length_scales: Iterable[float] = GPRT_LENGTH_GRID,
    noise_vars: Iterable[float] = GPRT_NOISE_GRID,
    rq_alpha: float = 1.0,
) -> GprtConfig:
    """Pick the (length scale, noise variance) pair with the lowest map RMSE.

    Both axes share the candidate length scale. The first candidate wins ties.
    """
    best: GprtConfig | None = None
    best_rmse = math.inf
    noise_list = list(noise_vars)
    for ell in length_scales:
        for noise_var in noise_list:
            cfg = GprtConfig(rq_alpha=rq_alpha, length_scale=(ell, ell), noise_var=noise_var)
            rmse, _ = map_errors(gprt_fit_predict(X, y, grid, cfg), truth)
            logger.debug("GPRT candidate l=%.1f noise=%.2f: RMSE %.4f", ell, noise_var, rmse)
            if rmse < best_rmse:
                best, best_rmse = cfg, rmse
    if best is None:
        raise ValidationError("GPRT tuning grid is empty")
    logger.info(
        "GPRT tuned: length_scale=%s noise_var=%.2f (RMSE %.4f)",
        best.length_scale, best.noise_var, best_rmse,
    )
    return best


def evaluate(
    system: AttentionKernelSystem,
    alpha: object,
    alpha_ref: object,
    y: object,
    map_hat: RadioMap | None = None,
    truth: RadioMap | None = None,
    report: SolveReport | None = None,
    *,
    kappa_raw: float | None = None,
    kappa_precond: float | None = None,
    kappa_jacobi: float | None = None,
    precond_time_s: float | None = None,
) -> MetricsRecord:
    """Residual, objective gap, prediction discrepancy and map errors.

    Raises:
        ZeroDenominatorError: If |y| = 0, R(alpha_ref) = 0, G alpha_ref = 0
            or the truth map is identically zero
    """
    n = system.n
    a = as_vector(alpha, n, "alpha")
    a_ref = as_vector(alpha_ref, n, "reference alpha")
    b = as_vector(y, n, "y")

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0:
        raise ZeroDenominatorError("relative residual")
    fit = system.apply_kernel(a)
    fit_ref = system.apply_kernel(a_ref)
    ref_obj = objective_from_fit(fit_ref, a_ref, b, system.lam)
    if ref_obj == 0:
        raise ZeroDenominatorError("objective gap")
    fit_ref_norm = float(np.linalg.norm(fit_ref))
    if fit_ref_norm == 0:
        raise ZeroDenominatorError("prediction discrepancy")

    record = MetricsRecord(
        residual=float(np.linalg.norm(system.lam * a + fit - b)) / b_norm,
        obj_gap=abs(objective_from_fit(fit, a, b, system.lam) - ref_obj) / abs(ref_obj),
        pred_disc=float(np.linalg.norm(fit - fit_ref)) / fit_ref_norm,
        kappa_raw=kappa_raw,
        kappa_precond=kappa_precond,
        kappa_jacobi=kappa_jacobi,
        precond_time_s=precond_time_s,
    )
    if map_hat is not None and truth is not None:
        record.rmse, record.nmse = map_errors(map_hat, truth)
    if report is not None:
        record.iters_to_target = report.iters_to_target
        record.iterations = report.iterations
        record.solver_time_s = report.wall_time_s
    return record


def discrepancy_map(a: RadioMap, b: RadioMap) -> RadioMap:
    """Pointwise |a - b| of two maps on the same grid."""
    if a.grid != b.grid:
        raise ValidationError("maps are on different grids")
    return RadioMap(grid=a.grid, values=np.abs(a.values - b.values))


def mid_row_slice(radio_map: RadioMap) -> pd.DataFrame:
    """Cross-section along the middle grid row: columns x, value_dbm."""
    grid = radio_map.grid
    row = grid.rows // 2
    xs = np.linspace(0.0, grid.domain_size, grid.cols)
    return pd.DataFrame({"x": xs, "value_dbm": radio_map.as_grid()[row].copy()})
