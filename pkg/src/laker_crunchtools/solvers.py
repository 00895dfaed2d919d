"""Solvers for the regularized kernel system (lambda I + G) alpha = y.

Preconditioned conjugate gradient (learned, Jacobi or identity
preconditioner), textbook CG, gradient descent on the regression
objective, and the dense Cholesky reference. Every iterative solver
returns the solution together with a SolveReport carrying its histories.
"""

import enum
import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BreakdownZeroCurvatureError,
    IndefinitePreconditionerError,
    InvalidConfigError,
)
from .kernel import AttentionKernelSystem, objective_from_fit
from .linalg import FloatArray, as_vector, chol_solve
from .models import SolverConfig

logger = logging.getLogger(__name__)

PrecondApply = Callable[[FloatArray], FloatArray]

DIVERGENCE_FACTOR = 1e6
GD_TRIAL_ITERS = 200
DEFAULT_GD_GRID = tuple(sorted(c * 10.0**-k for k in range(2, 9) for c in (1.0, 3.0)))


class Termination(enum.Enum):
    RESIDUAL_TOL = "ResidualTol"
    MAX_ITERS = "MaxIters"
    STAGNATION = "Stagnation"
    DIVERGED = "Diverged"
    TARGET_GAP = "TargetGap"


@dataclass
class SolveReport:
    """Iteration record of one solve. Histories include iteration 0."""

    iterations: int
    termination: Termination
    residual_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    pred_disc_history: list[float] = field(default_factory=list)
    iters_to_target: int | None = None
    wall_time_s: float = 0.0
    diverged: bool = False
    eta: float | None = None

    def obj_gap_history(self, ref_obj: float) -> list[float]:
        """Relative objective gap |R_k - R_ref| / |R_ref| per iteration."""
        if ref_obj == 0:
            return [math.nan for _ in self.objective_history]
        return [abs(v - ref_obj) / abs(ref_obj) for v in self.objective_history]


def iterations_to_target(
    objective_history: Sequence[float], ref_obj: float | None, target_tol: float
) -> int | None:
    """First iteration whose relative objective gap is within target_tol."""
    if ref_obj is None or ref_obj == 0:
        return None
    for k, value in enumerate(objective_history):
        if abs(value - ref_obj) <= target_tol * abs(ref_obj):
            return k
    return None


def identity_preconditioner(v: FloatArray) -> FloatArray:
    return v.copy()


def jacobi_preconditioner(system: AttentionKernelSystem) -> FloatArray:
    """Inverse diagonal d_i = 1 / (lambda + G_ii)."""
    return 1.0 / system.diagonal()


def diagonal_apply(d: FloatArray) -> PrecondApply:
    """P_apply(v) = d * v, for a vector or a block of columns."""

    def apply(v: FloatArray) -> FloatArray:
        return np.asarray(d * v if v.ndim == 1 else d[:, None] * v, dtype=np.float64)

    return apply


def _relative_distance(a: FloatArray, b: FloatArray, b_norm: float) -> float:
    return float(np.linalg.norm(a - b)) / b_norm if b_norm > 0 else math.nan


def pcg_solve(
    system: AttentionKernelSystem,
    y: object,
    precond_apply: PrecondApply,
    cfg: SolverConfig | None = None,
    ref_obj: float | None = None,
    ref_fit: FloatArray | None = None,
) -> tuple[FloatArray, SolveReport]:
    """Left-preconditioned conjugate gradient from alpha_0 = 0.

    Each iteration costs one operator apply and one preconditioner apply.
    G alpha is carried as y - r - lambda alpha so the objective history
    needs no extra matvec.

    Args:
        system: The SPD system lambda I + G
        y: Right-hand side
        precond_apply: SPD preconditioner map
        cfg: Tolerances and iteration cap (default 10 n)
        ref_obj: Reference objective, enables iters_to_target
        ref_fit: Reference fit G alpha_ref, enables the discrepancy history

    Returns:
        Tuple of (alpha, report)

    Raises:
        IndefinitePreconditionerError: If r^T P r <= 0
        BreakdownZeroCurvatureError: If p^T A p <= 0
    """
    cfg = cfg or SolverConfig()
    n = system.n
    b = as_vector(y, n, "y")
    lam = system.lam
    b_norm = float(np.linalg.norm(b))
    ref_norm = float(np.linalg.norm(ref_fit)) if ref_fit is not None else 0.0

    alpha = np.zeros(n)
    report = SolveReport(
        iterations=0,
        termination=Termination.RESIDUAL_TOL,
        residual_history=[1.0 if b_norm > 0 else 0.0],
        objective_history=[float(b @ b)],
    )
    if ref_fit is not None:
        report.pred_disc_history.append(_relative_distance(alpha, ref_fit, ref_norm))
    if b_norm == 0:
        return alpha, report

    cap = cfg.iteration_cap(n)
    start = time.perf_counter()
    r = b.copy()
    theta = precond_apply(r)
    rz = float(r @ theta)
    if rz <= 0:
        raise IndefinitePreconditionerError(0, rz)
    p = theta.copy()
    termination = Termination.MAX_ITERS
    k = 0

    while k < cap:
        Ap = system.apply(p)
        curvature = float(p @ Ap)
        if curvature <= 0:
            raise BreakdownZeroCurvatureError(k, curvature)
        delta = rz / curvature
        alpha += delta * p
        r -= delta * Ap
        k += 1

        fit = b - r - lam * alpha
        rel = float(np.linalg.norm(r)) / b_norm
        obj = objective_from_fit(fit, alpha, b, lam)
        report.residual_history.append(rel)
        report.objective_history.append(obj)
        if ref_fit is not None:
            report.pred_disc_history.append(_relative_distance(fit, ref_fit, ref_norm))

        if rel <= cfg.pcg_tol:
            termination = Termination.RESIDUAL_TOL
            break
        if (
            cfg.stop_at_target
            and ref_obj
            and abs(obj - ref_obj) <= cfg.target_tol * abs(ref_obj)
        ):
            termination = Termination.TARGET_GAP
            break

        theta = precond_apply(r)
        rz_next = float(r @ theta)
        if rz_next <= 0:
            raise IndefinitePreconditionerError(k, rz_next)
        p = theta + (rz_next / rz) * p
        rz = rz_next

    report.wall_time_s = time.perf_counter() - start
    report.iterations = k
    report.termination = termination
    report.iters_to_target = iterations_to_target(
        report.objective_history, ref_obj, cfg.target_tol
    )
    if termination is Termination.MAX_ITERS:
        logger.warning(
            "PCG hit the iteration cap %d at relative residual %.3e",
            cap, report.residual_history[-1],
        )
    logger.debug(
        "PCG n=%d finished in %d iterations (%s)", n, k, termination.value
    )
    return alpha, report


def plain_cg(
    system: AttentionKernelSystem,
    y: object,
    tol: float = 1e-10,
    max_iters: int | None = None,
) -> tuple[FloatArray, SolveReport]:
    """Textbook unpreconditioned conjugate gradient (Hestenes-Stiefel form)."""
    n = system.n
    b = as_vector(y, n, "y")
    b_norm = float(np.linalg.norm(b))
    x = np.zeros(n)
    report = SolveReport(
        iterations=0, termination=Termination.RESIDUAL_TOL, residual_history=[1.0]
    )
    if b_norm == 0:
        report.residual_history = [0.0]
        return x, report

    cap = max_iters if max_iters is not None else 10 * n
    start = time.perf_counter()
    r = b.copy()
    d = r.copy()
    rr = float(r @ r)
    report.termination = Termination.MAX_ITERS
    for k in range(1, cap + 1):
        Ad = system.apply(d)
        dAd = float(d @ Ad)
        if dAd <= 0:
            raise BreakdownZeroCurvatureError(k - 1, dAd)
        step = rr / dAd
        x = x + step * d
        r = r - step * Ad
        rr_next = float(r @ r)
        report.residual_history.append(math.sqrt(rr_next) / b_norm)
        report.iterations = k
        if math.sqrt(rr_next) <= tol * b_norm:
            report.termination = Termination.RESIDUAL_TOL
            break
        d = r + (rr_next / rr) * d
        rr = rr_next
    report.wall_time_s = time.perf_counter() - start
    return x, report


def gd_solve(
    system: AttentionKernelSystem,
    y: object,
    cfg: SolverConfig,
    ref_obj: float | None = None,
) -> tuple[FloatArray, SolveReport]:
    """Gradient descent on R(alpha) with a fixed step cfg.eta.

    Runs cfg.gd_budget iterations unless the objective gap reaches
    target_tol (when ref_obj is given), the objective stagnates over
    cfg.stagnation_window iterations, or it exceeds 1e6 times its initial
    value. Divergence is reported through the report, not raised.

    Raises:
        InvalidConfigError: If cfg.eta is not set
    """
    if cfg.eta is None:
        raise InvalidConfigError("gradient descent needs a step size (eta)")
    eta = cfg.eta
    n = system.n
    b = as_vector(y, n, "y")
    lam = system.lam
    b_norm = float(np.linalg.norm(b))

    alpha = np.zeros(n)
    obj0 = float(b @ b)
    report = SolveReport(
        iterations=0,
        termination=Termination.MAX_ITERS,
        residual_history=[1.0 if b_norm > 0 else 0.0],
        objective_history=[obj0],
        eta=eta,
    )
    if b_norm == 0:
        report.termination = Termination.RESIDUAL_TOL
        return alpha, report

    start = time.perf_counter()
    residual = -b
    window = cfg.stagnation_window
    for k in range(1, cfg.gd_budget + 1):
        grad = 2.0 * system.apply_kernel(residual)
        alpha = alpha - eta * grad
        fit = system.apply_kernel(alpha)
        residual = lam * alpha + fit - b
        obj = objective_from_fit(fit, alpha, b, lam)
        report.iterations = k
        report.residual_history.append(float(np.linalg.norm(residual)) / b_norm)
        report.objective_history.append(obj)

        if not math.isfinite(obj) or obj > DIVERGENCE_FACTOR * obj0:
            report.diverged = True
            report.termination = Termination.DIVERGED
            logger.warning("Gradient descent diverged at iteration %d (eta=%.3g)", k, eta)
            break
        if ref_obj and abs(obj - ref_obj) <= cfg.target_tol * abs(ref_obj):
            report.termination = Termination.TARGET_GAP
            break
        if k >= window:
            earlier = report.objective_history[k - window]
            if earlier - obj <= cfg.stagnation_rtol * abs(earlier):
                report.termination = Termination.STAGNATION
                break

    report.wall_time_s = time.perf_counter() - start
    report.iters_to_target = iterations_to_target(
        report.objective_history, ref_obj, cfg.target_tol
    )
    return alpha, report


def gd_grid_search(
    system: AttentionKernelSystem,
    y: object,
    grid: Sequence[float] | None = None,
    trial_iters: int = GD_TRIAL_ITERS,
) -> float:
    """Step size with the lowest objective after a fixed trial budget.

    Ties go to the smaller step; diverged trials never win unless every
    trial diverged, in which case the smallest step is returned.

    Raises:
        InvalidConfigError: If the grid is empty or has a non-positive step
    """
    steps = sorted(grid if grid is not None else DEFAULT_GD_GRID)
    if not steps:
        raise InvalidConfigError("gd grid must not be empty")
    if steps[0] <= 0:
        raise InvalidConfigError("gd grid steps must be positive")

    best_eta = steps[0]
    best_obj = math.inf
    for eta in steps:
        cfg = SolverConfig(eta=eta, gd_budget=trial_iters)
        _, report = gd_solve(system, y, cfg)
        final = math.inf if report.diverged else report.objective_history[-1]
        logger.debug("GD trial eta=%.3g: objective %.6g", eta, final)
        if final < best_obj:
            best_eta, best_obj = eta, final
    logger.info("GD grid search selected eta=%.3g", best_eta)
    return best_eta


def reference_solve(system: AttentionKernelSystem, y: object) -> FloatArray:
    """Exact minimizer alpha_ref = (lambda I + G)^{-1} y by dense Cholesky.

    Raises:
        NotPositiveDefiniteError: If lambda I + G fails Cholesky
    """
    return chol_solve(system.dense(), as_vector(y, system.n, "y"))
