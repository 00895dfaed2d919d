"""Spectrum tools.

Eigenvalue summary of lambda I + G for a sampled measurement set, and
the conditioning after learned and Jacobi preconditioning.
"""

import logging
import time
from typing import Any

import numpy as np

from ..bench import derive_seed, jacobi_condition_number
from ..cartography import generate_field, sample_measurements
from ..errors import ValidationError
from ..kernel import build_system, embed_positions
from ..linalg import precond_condition_number, sym_eigvals
from ..models import MAX_SPECTRUM_SIZE, CccpConfig, EmbeddingConfig, FieldConfig
from ..precond import learn_preconditioner

logger = logging.getLogger(__name__)

TOP_EIGENVALUES = 5


def spectrum_summary(
    n: int,
    lambda_: float = 1e-2,
    gamma: float = 1e-1,
    seed: int = 0,
    embedding: EmbeddingConfig | None = None,
    field: FieldConfig | None = None,
) -> dict[str, Any]:
    """Spectrum and condition numbers for an n-point sampled system.

    Args:
        n: Number of measurement positions
        lambda_: Ridge regularization
        gamma: CCCP regularization
        seed: Seed for the field, positions and random directions
        embedding: Feature-map settings (defaults when omitted)
        field: Field generator settings (defaults when omitted)

    Returns:
        Eigenvalue statistics of G and condition numbers of lambda I + G,
        of the learned-preconditioned and of the Jacobi-scaled system
    """
    if n < 2 or n > MAX_SPECTRUM_SIZE:
        raise ValidationError(f"n must be between 2 and {MAX_SPECTRUM_SIZE}, got {n}")
    embedding = embedding or EmbeddingConfig()
    model = generate_field(field or FieldConfig(), derive_seed(seed))
    measurements = sample_measurements(model, n, 0.0, derive_seed(seed, n))
    system = build_system(embed_positions(measurements.positions, embedding), lambda_)

    eigvals = sym_eigvals(system.G)
    kappa_raw = float((eigvals[-1] + lambda_) / (eigvals[0] + lambda_))

    start = time.perf_counter()
    precond, report = learn_preconditioner(system, CccpConfig(gamma=gamma, seed=seed))
    precond_time = time.perf_counter() - start
    kappa_precond = precond_condition_number(precond.matrix, system.dense())

    result = {
        "n": n,
        "lambda": lambda_,
        "gamma": gamma,
        "eigenvalues": {
            "max": float(eigvals[-1]),
            "min": float(eigvals[0]),
            "median": float(np.median(eigvals)),
            "top": eigvals[::-1][:TOP_EIGENVALUES].tolist(),
            "below_lambda": int(np.sum(eigvals < lambda_)),
            "mean_diagonal": float(np.mean(np.diag(system.G))),
        },
        "kappa_raw": kappa_raw,
        "kappa_precond": kappa_precond,
        "kappa_jacobi": jacobi_condition_number(system),
        "reduction": kappa_raw / kappa_precond,
        "cccp": {
            "directions": report.nr_used,
            "iterations": report.iterations,
            "converged": report.converged,
            "rho": report.rho_used,
            "fp_residual": report.final_fp_residual,
            "time_s": precond_time,
        },
    }
    logger.info(
        "Spectrum n=%d: kappa_raw=%.3e kappa_precond=%.3e", n, kappa_raw, kappa_precond
    )
    return result
