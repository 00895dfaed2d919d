"""Tests for input validation."""

import numpy as np
import pytest
from pydantic import ValidationError

from laker_crunchtools.config import Config, get_config
from laker_crunchtools.errors import (
    SAFE_PATH_MAX_LENGTH,
    ConfigurationError,
    DimensionMismatchError,
    OutputError,
)
from laker_crunchtools.models import (
    CccpConfig,
    ExperimentConfig,
    GprtConfig,
    GridSpec,
    SolverConfig,
)


class TestExperimentConfig:
    """Tests for sweep definition validation."""

    def test_defaults(self) -> None:
        """Defaults should cover the standard sweep."""
        config = ExperimentConfig()
        assert config.sizes == [50, 200, 500, 1000, 2000]
        assert config.seeds == [0, 1, 2, 3, 4]
        assert config.methods == ["laker", "jacobi", "gd", "reference", "gprt"]
        assert config.lambda_ == 1e-2

    def test_lambda_alias(self) -> None:
        """The JSON key is "lambda" and dumps keep it."""
        config = ExperimentConfig.model_validate({"lambda": 0.5})
        assert config.lambda_ == 0.5
        assert config.model_dump(by_alias=True)["lambda"] == 0.5

    def test_lambda_positive(self) -> None:
        """A zero ridge parameter should fail."""
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"lambda": 0.0})

    def test_sizes_ascending(self) -> None:
        """Sizes must be strictly ascending."""
        with pytest.raises(ValidationError, match="ascending"):
            ExperimentConfig(sizes=[200, 50])
        with pytest.raises(ValidationError, match="ascending"):
            ExperimentConfig(sizes=[50, 50])

    def test_sizes_non_empty(self) -> None:
        """An empty size list should fail."""
        with pytest.raises(ValidationError, match="empty"):
            ExperimentConfig(sizes=[])

    def test_seeds(self) -> None:
        """Seeds must be non-empty and non-negative."""
        with pytest.raises(ValidationError, match="empty"):
            ExperimentConfig(seeds=[])
        with pytest.raises(ValidationError, match="non-negative"):
            ExperimentConfig(seeds=[-1])

    def test_unknown_method(self) -> None:
        """Methods outside the known set should fail."""
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"methods": ["laker", "newton"]})

    def test_duplicate_method(self) -> None:
        """A repeated method should fail."""
        with pytest.raises(ValidationError, match="repeat"):
            ExperimentConfig(methods=["laker", "laker"])

    def test_extra_key_forbidden(self) -> None:
        """Misspelled keys should not be silently ignored."""
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"lamda": 0.1})

    def test_gd_grid(self) -> None:
        """A step-size grid must be non-empty and positive."""
        with pytest.raises(ValidationError):
            ExperimentConfig(gd_grid=[])
        with pytest.raises(ValidationError):
            ExperimentConfig(gd_grid=[1e-3, 0.0])

    def test_nested_sections(self) -> None:
        """Nested sections should be validated as their own models."""
        config = ExperimentConfig.model_validate({"cccp": {"gamma": 0.0, "max_iters": 5}})
        assert config.cccp.gamma == 0.0
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({"cccp": {"rho_floor": 0.0}})

    def test_solver_config(self) -> None:
        """Shared solver settings should carry the sweep tolerances."""
        config = ExperimentConfig(pcg_tol=1e-8, target_tol=1e-2, gd_budget=10)
        solver = config.solver_config()
        assert (solver.pcg_tol, solver.target_tol, solver.gd_budget) == (1e-8, 1e-2, 10)


class TestSolverConfig:
    """Tests for solver settings."""

    def test_iteration_cap_default(self) -> None:
        """Without max_iters the cap should be 10 n."""
        assert SolverConfig().iteration_cap(37) == 370

    def test_iteration_cap_override(self) -> None:
        """An explicit max_iters should win."""
        assert SolverConfig(max_iters=12).iteration_cap(1000) == 12

    def test_tolerance_range(self) -> None:
        """Tolerances must lie in (0, 1)."""
        with pytest.raises(ValidationError):
            SolverConfig(pcg_tol=0.0)
        with pytest.raises(ValidationError):
            SolverConfig(target_tol=1.0)

    def test_frozen(self) -> None:
        """Settings should be immutable once built."""
        with pytest.raises(ValidationError):
            SolverConfig().pcg_tol = 1e-3  # type: ignore[misc]


class TestModelBounds:
    """Tests for the smaller configuration models."""

    def test_gprt_length_scale_positive(self) -> None:
        """Length scales must be positive on both axes."""
        with pytest.raises(ValidationError, match="positive"):
            GprtConfig(length_scale=(10.0, 0.0))

    def test_cccp_epsilon_may_be_zero(self) -> None:
        """epsilon = 0 is accepted for analysis runs."""
        assert CccpConfig(epsilon=0.0).epsilon == 0.0

    def test_cccp_rho_floor_range(self) -> None:
        """The shrinkage floor must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            CccpConfig(rho_floor=1.5)


class TestGridSpec:
    """Tests for the evaluation grid."""

    def test_size(self) -> None:
        """M should be rows times cols."""
        assert GridSpec(rows=3, cols=4).size == 12

    def test_points_row_major(self) -> None:
        """Points should run along x first, then step in y."""
        points = GridSpec(rows=2, cols=3, domain_size=10.0).points()
        expected = np.array(
            [[0.0, 0.0], [5.0, 0.0], [10.0, 0.0], [0.0, 10.0], [5.0, 10.0], [10.0, 10.0]]
        )
        assert np.array_equal(points, expected)


class TestEnvironmentConfig:
    """Tests for environment-derived settings."""

    def test_defaults(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Unset variables should give the defaults."""
        for name in ("LAKER_THREADS", "LAKER_LOG_LEVEL", "LAKER_OUTPUT_DIR"):
            monkeypatch.delenv(name, raising=False)
        config = Config()
        assert config.threads == 1
        assert config.log_level == "WARNING"
        assert str(config.output_dir) == "results"

    def test_values(self, monkeypatch: pytest.MonkeyPatch, tmp_path) -> None:
        """Set variables should be parsed."""
        monkeypatch.setenv("LAKER_THREADS", "4")
        monkeypatch.setenv("LAKER_LOG_LEVEL", "debug")
        monkeypatch.setenv("LAKER_OUTPUT_DIR", str(tmp_path))
        config = get_config()
        assert config.threads == 4
        assert config.log_level == "DEBUG"
        assert config.output_dir == tmp_path
        assert get_config() is config

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_bad_threads(self, monkeypatch: pytest.MonkeyPatch, value: str) -> None:
        """Non-positive or non-numeric thread counts should fail."""
        monkeypatch.setenv("LAKER_THREADS", value)
        with pytest.raises(ConfigurationError, match="LAKER_THREADS"):
            Config()

    def test_bad_log_level(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Unknown log levels should fail."""
        monkeypatch.setenv("LAKER_LOG_LEVEL", "LOUD")
        with pytest.raises(ConfigurationError, match="LAKER_LOG_LEVEL"):
            Config()


class TestErrorMessages:
    """Tests for user-facing error text."""

    def test_output_path_truncated(self) -> None:
        """Long paths should be cut to their tail."""
        path = "/tmp/" + "a" * 300 + "/numerical.csv"
        message = str(OutputError(path, "disk full"))
        assert message.startswith("Cannot write ...")
        assert message.endswith("numerical.csv: disk full")
        assert len(message) < SAFE_PATH_MAX_LENGTH + 40

    def test_dimension_mismatch(self) -> None:
        """The message should name the operand and both shapes."""
        message = str(DimensionMismatchError("y", 3, 4))
        assert message == "Dimension mismatch for y: expected 3, got 4"
