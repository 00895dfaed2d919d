"""Pydantic models for configuration validation.

Every tunable of the toolkit is carried by one of these models so that
values coming from a JSON experiment file, the CLI or an MCP client are
range-checked once, before any matrix is built.
"""

from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator

METHODS = ("laker", "jacobi", "gd", "reference", "gprt")
Method = Literal["laker", "jacobi", "gd", "reference", "gprt"]

MAX_SEED = 2**64 - 1
DEFAULT_SIZES = (50, 200, 500, 1000, 2000)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
MAX_SPECTRUM_SIZE = 5000


class EmbeddingConfig(BaseModel):
    """Random Fourier feature map from positions to embeddings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    d_e: int = Field(default=10, ge=2, description="Embedding dimension (even)")
    seed: int = Field(default=0, ge=0, le=MAX_SEED, description="Feature-map seed")
    length_scale: float = Field(default=40.0, gt=0, description="Frequency scale in meters")
    target_mean_affinity: float = Field(
        default=0.35, gt=0, lt=1, description="Mean pairwise <e_i, e_j> on the calibration grid"
    )
    calibration_points: int = Field(default=512, ge=16, description="Calibration set size")
    domain_size: float = Field(default=100.0, gt=0, description="Side of the square domain")


class CccpConfig(BaseModel):
    """Shrinkage-regularized CCCP iteration settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma: float = Field(default=1e-1, ge=0, description="Trace-penalty weight")
    epsilon: float = Field(
        default=1e-12, ge=0, description="Quadratic-form safeguard (0 only for analysis)"
    )
    rho_floor: float = Field(default=1e-3, gt=0, le=1, description="Minimum shrinkage")
    max_iters: int = Field(default=200, ge=1)
    fp_tol: float = Field(default=1e-8, gt=0, lt=1, description="Relative fixed-point tolerance")
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    n_directions: int | None = Field(
        default=None, ge=1, description="Override for the N_r schedule"
    )
    strict: bool = Field(default=False, description="Raise instead of flagging max_iters")
    track_objective: bool = Field(
        default=False, description="Record the likelihood objective at every iteration"
    )


class SolverConfig(BaseModel):
    """Iterative solver tolerances and budgets."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    pcg_tol: float = Field(default=1e-10, gt=0, lt=1, description="Relative residual target")
    target_tol: float = Field(default=1e-3, gt=0, lt=1, description="Objective-gap target")
    max_iters: int | None = Field(default=None, ge=1, description="Defaults to 10 n")
    eta: float | None = Field(default=None, gt=0, description="Gradient descent step size")
    gd_budget: int = Field(default=2000, ge=1)
    stop_at_target: bool = Field(
        default=False, description="Stop as soon as the objective gap meets target_tol"
    )
    stagnation_window: int = Field(default=50, ge=1)
    stagnation_rtol: float = Field(default=1e-14, ge=0)

    def iteration_cap(self, n: int) -> int:
        """Resolve the PCG iteration cap for an n-dimensional system."""
        return self.max_iters if self.max_iters is not None else 10 * n


class FieldConfig(BaseModel):
    """Synthetic radio field generator settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_transmitters: int = Field(default=3, ge=1)
    power_dbm_min: float = Field(default=-20.0, description="Lowest transmit power (dBm)")
    power_range_db: float = Field(default=10.0, ge=0, description="Log-uniform power spread")
    path_loss_exponent: float = Field(default=2.5, gt=0)
    shadowing_std_db: float = Field(default=4.0, ge=0)
    shadowing_corr_m: float = Field(default=25.0, gt=0)
    shadowing_waves: int = Field(default=32, ge=1)
    domain_size: float = Field(default=100.0, gt=0)


class GridSpec(BaseModel):
    """Uniform evaluation grid over the square domain."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    rows: int = Field(default=45, ge=1)
    cols: int = Field(default=45, ge=1)
    domain_size: float = Field(default=100.0, gt=0)

    @property
    def size(self) -> int:
        """Number of grid points M."""
        return self.rows * self.cols

    def points(self) -> NDArray[np.float64]:
        """Grid coordinates, row-major, shape (M, 2) as (x, y)."""
        xs = np.linspace(0.0, self.domain_size, self.cols)
        ys = np.linspace(0.0, self.domain_size, self.rows)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


class GprtConfig(BaseModel):
    """Rational quadratic Gaussian process baseline settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    rq_alpha: float = Field(default=1.0, gt=0, description="RQ shape parameter")
    length_scale: tuple[float, float] = Field(
        default=(20.0, 20.0), description="Per-axis length scales in meters"
    )
    noise_var: float = Field(default=2.25, ge=1e-8, description="Observation noise variance")

    @field_validator("length_scale")
    @classmethod
    def validate_length_scale(cls, v: tuple[float, float]) -> tuple[float, float]:
        if min(v) <= 0:
            raise ValueError("length_scale entries must be positive")
        return v


class ExperimentConfig(BaseModel):
    """Full sweep definition; JSON keys mirror the field names."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    sizes: list[int] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    lambda_: float = Field(default=1e-2, gt=0, alias="lambda", description="Regularization")
    gamma: float = Field(default=1e-1, ge=0, description="CCCP regularization")
    seeds: list[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    methods: list[Method] = Field(default_factory=lambda: list(METHODS))
    output_dir: Path | None = Field(default=None)
    pcg_tol: float = Field(default=1e-10, gt=0, lt=1)
    target_tol: float = Field(default=1e-3, gt=0, lt=1)
    gd_budget: int = Field(default=2000, ge=1)
    gd_grid: list[float] | None = Field(default=None, description="GD step-size grid")
    noise_std: float = Field(default=1.5, ge=0, description="Measurement noise (dB)")
    write_maps: bool = Field(default=False, description="Emit per-run map CSVs")
    gprt_autotune: bool = Field(default=False, description="Grid-search GPRT once at n=200")
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    field: FieldConfig = Field(default_factory=FieldConfig)
    grid: GridSpec = Field(default_factory=GridSpec)
    gprt: GprtConfig = Field(default_factory=GprtConfig)
    cccp: CccpConfig = Field(default_factory=CccpConfig)

    @field_validator("sizes")
    @classmethod
    def validate_sizes(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("sizes must not be empty")
        if any(n < 1 for n in v):
            raise ValueError("sizes must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sizes must be strictly ascending")
        return v

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("seeds must not be empty")
        if any(s < 0 or s > MAX_SEED for s in v):
            raise ValueError("seeds must be non-negative 64-bit integers")
        return v

    @field_validator("methods")
    @classmethod
    def validate_methods(cls, v: list[Method]) -> list[Method]:
        if len(set(v)) != len(v):
            raise ValueError("methods must not repeat")
        return v

    @field_validator("gd_grid")
    @classmethod
    def validate_gd_grid(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and (not v or min(v) <= 0):
            raise ValueError("gd_grid must be a non-empty list of positive step sizes")
        return v

    def solver_config(self) -> SolverConfig:
        """Solver settings shared by every method of the sweep."""
        return SolverConfig(
            pcg_tol=self.pcg_tol, target_tol=self.target_tol, gd_budget=self.gd_budget
        )


class ResultRow(BaseModel):
    """One (n, method, seed) cell of a sweep, metrics flattened."""

    model_config = ConfigDict(extra="forbid")

    n: int
    method: Method
    seed: int
    status: Literal["ok", "failed"] = "ok"
    error: str | None = None
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
    history_path: str | None = None
    residual_history: list[float] = Field(default_factory=list, exclude=True)
    obj_gap_history: list[float] = Field(default_factory=list, exclude=True)
