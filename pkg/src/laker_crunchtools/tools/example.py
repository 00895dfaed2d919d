"""Three-point worked example.

A hand-sized instance of the whole pipeline: three measured embeddings,
the kernel, the coefficient solve and one prediction. The expected values
are rounded to three decimals, so the coefficient check is a residual test
plus a loose absolute tolerance.
"""

from typing import Any

import numpy as np

from ..kernel import build_system, cross_kernel
from ..models import SolverConfig
from ..solvers import identity_preconditioner, pcg_solve

EMBEDDINGS = ((0.241, 0.444), (-0.336, 0.112), (-0.220, 0.353))
MEASUREMENTS = (-66.14, -65.77, -77.30)
LAMBDA = 0.1
QUERY_EMBEDDING = (0.051, 0.452)

EXPECTED_KERNEL = (
    (1.291, 0.969, 1.109),
    (0.969, 1.133, 1.120),
    (1.109, 1.120, 1.189),
)
EXPECTED_ALPHA = (0.815, 5.438, -65.406)
EXPECTED_CROSS_KERNEL = (1.237, 1.034, 1.160)
EXPECTED_PREDICTION = -69.2
GROUND_TRUTH_DBM = -67.3

KERNEL_TOL = 5e-3
ALPHA_TOL = 5e-2
ALPHA_RESIDUAL_TOL = 1e-3
PREDICTION_TOL = 0.1
PCG_TOL = 1e-10


def worked_example() -> dict[str, Any]:
    """Run the three-point example end to end and check every expected value.

    Returns:
        Kernel, coefficients, cross kernel, prediction, PCG statistics and
        one boolean per check, plus the overall "passed" flag
    """
    E = np.array(EMBEDDINGS)
    y = np.array(MEASUREMENTS)
    system = build_system(E, LAMBDA)
    alpha, report = pcg_solve(
        system, y, identity_preconditioner, SolverConfig(pcg_tol=PCG_TOL)
    )
    cross = cross_kernel(E, np.array(QUERY_EMBEDDING))
    prediction = float(cross @ alpha)

    expected_alpha = np.array(EXPECTED_ALPHA)
    expected_residual = float(
        np.linalg.norm(system.apply(expected_alpha) - y) / np.linalg.norm(y)
    )
    checks = {
        "kernel": bool(np.max(np.abs(system.G - np.array(EXPECTED_KERNEL))) <= KERNEL_TOL),
        "alpha": bool(
            np.max(np.abs(alpha - expected_alpha)) <= ALPHA_TOL
            and expected_residual <= ALPHA_RESIDUAL_TOL
        ),
        "cross_kernel": bool(
            np.max(np.abs(cross - np.array(EXPECTED_CROSS_KERNEL))) <= KERNEL_TOL
        ),
        "prediction": bool(abs(prediction - EXPECTED_PREDICTION) <= PREDICTION_TOL),
        "pcg": bool(report.residual_history[-1] <= PCG_TOL and report.iterations <= len(y)),
    }
    return {
        "kernel": system.G.round(6).tolist(),
        "system_matrix": system.dense().round(6).tolist(),
        "alpha": alpha.round(6).tolist(),
        "expected_alpha_residual": expected_residual,
        "cross_kernel": cross.round(6).tolist(),
        "prediction_dbm": round(prediction, 4),
        "ground_truth_dbm": GROUND_TRUTH_DBM,
        "pcg_iterations": report.iterations,
        "pcg_residual": report.residual_history[-1],
        "checks": checks,
        "passed": all(checks.values()),
    }
