"""Dense symmetric linear algebra primitives.

Thin, validated wrappers over LAPACK (through scipy.linalg) for the
handful of operations every other module needs: Cholesky solves,
symmetric eigendecompositions, SPD matrix powers and condition numbers.
LAPACK failures are translated into the package's UserError types.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import linalg as sla

from .errors import (
    DimensionMismatchError,
    NoConvergenceError,
    NotPositiveDefiniteError,
    ValidationError,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

SYMMETRY_RTOL = 1e-12
EIGENVALUE_FLOOR = 1e-14


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues ascending."""

    eigenvalues: FloatArray
    eigenvectors: FloatArray

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def w_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def w_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> FloatArray:
        """Return V diag(w) V^T."""
        V = self.eigenvectors
        return np.asarray((V * self.eigenvalues) @ V.T, dtype=np.float64)


def as_symmetric(A: object, what: str = "matrix") -> FloatArray:
    """Validate that A is a finite, square, symmetric float64 matrix.

    Raises:
        ValidationError: If A is not square, not finite or not symmetric.
    """
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {M.shape}")
    if M.shape[0] == 0:
        raise ValidationError(f"{what} must not be empty")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{what} has non-finite entries")
    asym = np.abs(M - M.T)
    if np.any(asym > SYMMETRY_RTOL * np.maximum(1.0, np.abs(M))):
        raise ValidationError(f"{what} is not symmetric (max |A - A^T| = {asym.max():.3e})")
    return M


def as_vector(y: object, n: int, what: str = "vector") -> FloatArray:
    """Validate that y is a finite float64 vector of length n."""
    v = np.asarray(y, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != n:
        raise DimensionMismatchError(what, (n,), v.shape)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} has non-finite entries")
    return v


def cholesky_factor(A: object, what: str = "matrix") -> tuple[FloatArray, bool]:
    """Cholesky-factor an SPD matrix for use with scipy.linalg.cho_solve.

    Raises:
        NotPositiveDefiniteError: If a pivot is not positive.
    """
    M = as_symmetric(A, what)
    try:
        factor, lower = sla.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(what, "Cholesky pivot <= 0") from e
    return factor, lower


def cholesky_lower(A: object, what: str = "matrix") -> FloatArray:
    """Lower-triangular Cholesky factor L with A = L L^T.

    Raises:
        NotPositiveDefiniteError: If a pivot is not positive.
    """
    M = as_symmetric(A, what)
    try:
        L = sla.cholesky(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(what, "Cholesky pivot <= 0") from e
    return np.asarray(L, dtype=np.float64)


def chol_solve(A: object, y: object) -> FloatArray:
    """Solve A x = y for SPD A by Cholesky factorization.

    Args:
        A: Symmetric positive definite n x n matrix
        y: Right-hand side of length n

    Returns:
        Solution vector x

    Raises:
        NotPositiveDefiniteError: If the factorization meets a pivot <= 0
        DimensionMismatchError: If len(y) != n
    """
    factor = cholesky_factor(A)
    rhs = as_vector(y, factor[0].shape[0], "right-hand side")
    return np.asarray(sla.cho_solve(factor, rhs, check_finite=False), dtype=np.float64)


def sym_eig(A: object) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix, eigenvalues ascending.

    Raises:
        NoConvergenceError: If the LAPACK driver fails to converge.
    """
    M = as_symmetric(A)
    try:
        w, V = sla.eigh(M, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NoConvergenceError("symmetric eigensolver", M.shape[0]) from e
    return EigenDecomposition(
        eigenvalues=np.asarray(w, dtype=np.float64), eigenvectors=np.asarray(V, dtype=np.float64)
    )


def sym_eigvals(A: object) -> FloatArray:
    """Eigenvalues only, ascending."""
    M = as_symmetric(A)
    try:
        w = sla.eigh(M, eigvals_only=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NoConvergenceError("symmetric eigensolver", M.shape[0]) from e
    return np.asarray(w, dtype=np.float64)


def min_eigenvalue(A: object) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    M = as_symmetric(A)
    try:
        w = sla.eigh(M, eigvals_only=True, subset_by_index=[0, 0], check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NoConvergenceError("symmetric eigensolver", M.shape[0]) from e
    return float(w[0])


def spd_power(S: object, power: float, what: str = "matrix") -> FloatArray:
    """Return S^power = V diag(w^power) V^T for SPD S.

    Raises:
        NotPositiveDefiniteError: If w_min <= 1e-14 * w_max.
    """
    eig = sym_eig(S)
    if eig.w_min <= 0 or eig.w_min <= EIGENVALUE_FLOOR * eig.w_max:
        raise NotPositiveDefiniteError(
            what, f"w_min = {eig.w_min:.3e}, w_max = {eig.w_max:.3e}"
        )
    V = eig.eigenvectors
    P = (V * eig.eigenvalues**power) @ V.T
    return np.asarray(0.5 * (P + P.T), dtype=np.float64)


def spd_inv_sqrt(S: object) -> FloatArray:
    """Inverse square root of an SPD matrix, the preconditioner map P = S^{-1/2}."""
    return spd_power(S, -0.5, "covariance estimate")


def condition_number_spd(A: object) -> float:
    """Spectral condition number w_max / w_min of an SPD matrix.

    Raises:
        NotPositiveDefiniteError: If the smallest eigenvalue is not positive.
    """
    w = sym_eigvals(A)
    if w[0] <= 0:
        raise NotPositiveDefiniteError("matrix", f"w_min = {w[0]:.3e}")
    return float(w[-1] / w[0])


def precond_condition_number(P: object, A: object) -> float:
    """Condition number of the preconditioned operator P A.

    PA is similar to P^{1/2} A P^{1/2}, which is SPD, so the eigenvalue
    ratio is computed on that symmetric form.
    """
    Pm = as_symmetric(P, "preconditioner")
    Am = as_symmetric(A, "system matrix")
    if Pm.shape != Am.shape:
        raise DimensionMismatchError("preconditioner", Am.shape, Pm.shape)
    R = spd_power(Pm, 0.5, "preconditioner")
    M = R @ Am @ R
    return condition_number_spd(0.5 * (M + M.T))
