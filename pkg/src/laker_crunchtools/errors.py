"""Safe error types that can be shown to users.

Every error the toolkit raises on purpose derives from UserError. Messages
are written for a CLI user or an MCP client: they name the failing quantity
and its value, never internal array dumps. Third-party failures (LAPACK,
file IO) are caught at the module boundary and re-raised as one of these.
"""

SAFE_PATH_MAX_LENGTH = 120


class UserError(Exception):
    """Base class for safe errors that can be shown to users."""

    pass


class ConfigurationError(UserError):
    """Error in process or experiment configuration."""

    pass


class InvalidConfigError(ConfigurationError):
    """A numerical configuration value is outside its valid range."""

    pass


class ValidationError(UserError):
    """Input validation error."""

    pass


class DimensionMismatchError(ValidationError):
    """Operand shapes do not agree."""

    def __init__(self, what: str, expected: object, got: object) -> None:
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {got}")


class NotPositiveDefiniteError(UserError):
    """A matrix required to be symmetric positive definite is not."""

    def __init__(self, what: str, detail: str = "") -> None:
        msg = f"{what} is not positive definite"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NoConvergenceError(UserError):
    """An eigensolver or fixed-point iteration exhausted its budget."""

    def __init__(self, what: str, iterations: int) -> None:
        self.iterations = iterations
        super().__init__(f"{what} did not converge after {iterations} iterations")


class DegenerateDirectionError(UserError):
    """A random direction collapsed to (numerically) zero length."""

    def __init__(self, index: int, attempts: int) -> None:
        super().__init__(
            f"Random direction {index} stayed degenerate after {attempts} resamples"
        )


class MaxItersExceededError(NoConvergenceError):
    """The CCCP loop hit max_iters in strict mode."""

    pass


class IndefinitePreconditionerError(UserError):
    """PCG saw r^T P r <= 0, so the preconditioner is not SPD."""

    def __init__(self, iteration: int, value: float) -> None:
        super().__init__(
            f"Preconditioner is not positive definite: r^T P r = {value:.3e} "
            f"at iteration {iteration}"
        )


class BreakdownZeroCurvatureError(UserError):
    """PCG saw p^T A p <= 0, so the system operator is not SPD."""

    def __init__(self, iteration: int, value: float) -> None:
        super().__init__(
            f"Zero or negative curvature p^T A p = {value:.3e} at iteration {iteration}"
        )


class ZeroDenominatorError(UserError):
    """A relative metric was requested against a zero reference."""

    def __init__(self, metric: str) -> None:
        super().__init__(f"Cannot compute {metric}: reference denominator is zero")


class EmptyRowsError(UserError):
    """A table was requested from an empty set of result rows."""

    def __init__(self) -> None:
        super().__init__("No result rows to emit; check the selected methods and sizes")


class OutputError(UserError):
    """Writing a result file failed."""

    def __init__(self, path: str, reason: str) -> None:
        if len(path) > SAFE_PATH_MAX_LENGTH:
            path = "..." + path[-SAFE_PATH_MAX_LENGTH:]
        super().__init__(f"Cannot write {path}: {reason}")
