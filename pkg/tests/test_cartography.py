"""Tests for field generation, map reconstruction, GPRT and metrics."""

import numpy as np
import pandas as pd
import pytest

from laker_crunchtools.cartography import (
    MAP_CSV_COLUMNS,
    RadioFieldModel,
    RadioMap,
    discrepancy_map,
    evaluate,
    field_value,
    field_values,
    generate_field,
    gprt_fit_predict,
    map_errors,
    mid_row_slice,
    predict,
    reconstruct_map,
    rq_kernel,
    sample_measurements,
    truth_map,
    tune_gprt,
)
from laker_crunchtools.errors import ZeroDenominatorError
from laker_crunchtools.kernel import AttentionKernelSystem, build_system, embed_positions
from laker_crunchtools.models import EmbeddingConfig, FieldConfig, GprtConfig, GridSpec
from laker_crunchtools.solvers import reference_solve
from tests.conftest import EXAMPLE_ALPHA_EXACT, EXAMPLE_EMBEDDINGS, EXAMPLE_QUERY, EXAMPLE_Y


def single_transmitter(position: tuple[float, float], power_mw: float) -> RadioFieldModel:
    return RadioFieldModel(
        tx_positions=np.array([position]),
        tx_powers_mw=np.array([power_mw]),
        path_loss_exponent=2.5,
        shadow_wavevectors=np.zeros((1, 2)),
        shadow_phases=np.zeros(1),
        shadow_amplitude=0.0,
    )


class TestFieldModel:
    """Tests for the synthetic radio field."""

    def test_deterministic(self) -> None:
        """A fixed seed should give the same field."""
        a = generate_field(FieldConfig(), 4)
        b = generate_field(FieldConfig(), 4)
        pts = GridSpec(rows=5, cols=5).points()
        assert np.array_equal(field_values(a, pts), field_values(b, pts))

    def test_no_shadowing(self) -> None:
        """With zero shadowing the field is pure path loss."""
        model = generate_field(FieldConfig(shadowing_std_db=0.0), 2)
        x = np.array([[30.0, 40.0]])
        dist = np.linalg.norm(model.tx_positions - x, axis=1)
        expected = 10 * np.log10(np.sum(model.tx_powers_mw / (1 + dist) ** 2.5))
        assert field_values(model, x)[0] == pytest.approx(expected)

    def test_dynamic_range(self) -> None:
        """The default field should span at least 20 dB on the grid."""
        values = truth_map(generate_field(FieldConfig(), 0), GridSpec()).values
        assert values.max() - values.min() >= 20.0

    def test_value_at_transmitter(self) -> None:
        """At the transmitter the field equals 10 log10(P)."""
        model = single_transmitter((20.0, 30.0), 0.01)
        assert field_value(model, [20.0, 30.0]) == pytest.approx(-20.0)

    def test_monotone_path_loss(self) -> None:
        """The field should decrease with distance from a single transmitter."""
        model = single_transmitter((10.0, 10.0), 0.05)
        ray = np.column_stack([np.linspace(10.0, 90.0, 40), np.full(40, 10.0)])
        assert np.all(np.diff(field_values(model, ray)) < 0)

    def test_superposition(self, rng: np.random.Generator) -> None:
        """Two transmitters should dominate either one alone."""
        a = single_transmitter((20.0, 20.0), 0.02)
        b = single_transmitter((70.0, 60.0), 0.05)
        both = RadioFieldModel(
            tx_positions=np.vstack([a.tx_positions, b.tx_positions]),
            tx_powers_mw=np.concatenate([a.tx_powers_mw, b.tx_powers_mw]),
            path_loss_exponent=2.5,
            shadow_wavevectors=np.zeros((1, 2)),
            shadow_phases=np.zeros(1),
            shadow_amplitude=0.0,
        )
        pts = rng.uniform(0, 100, size=(200, 2))
        combined = field_values(both, pts)
        assert np.all(combined >= field_values(a, pts))
        assert np.all(combined >= field_values(b, pts))


class TestMeasurements:
    """Tests for noisy point measurements."""

    def test_noise_free(self) -> None:
        """Zero noise should return the field itself."""
        model = generate_field(FieldConfig(), 0)
        m = sample_measurements(model, 50, 0.0, seed=1)
        assert np.array_equal(m.values, field_values(model, m.positions))

    def test_deterministic(self) -> None:
        """A fixed seed should give the same set."""
        model = generate_field(FieldConfig(), 0)
        a = sample_measurements(model, 20, 1.5, seed=3)
        b = sample_measurements(model, 20, 1.5, seed=3)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.values, b.values)

    def test_noise_level(self) -> None:
        """The residual noise std should be close to 1.5 dB."""
        model = generate_field(FieldConfig(), 0)
        m = sample_measurements(model, 10_000, 1.5, seed=5)
        assert m.truth is not None
        assert 1.45 <= np.std(m.values - m.truth) <= 1.55


class TestReconstruction:
    """Tests for kernel-expansion maps."""

    def test_worked_example_prediction(self) -> None:
        """The example query should predict about -69.2 dBm."""
        value = predict(EXAMPLE_EMBEDDINGS, EXAMPLE_ALPHA_EXACT, EXAMPLE_QUERY[None, :])
        assert value[0] == pytest.approx(-69.2, abs=0.1)

    def test_zero_coefficients(self, rng: np.random.Generator) -> None:
        """alpha = 0 should give an all-zero map."""
        cfg = EmbeddingConfig()
        E = embed_positions(rng.uniform(0, 100, size=(10, 2)), cfg)
        radio_map = reconstruct_map(E, np.zeros(10), GridSpec(rows=4, cols=4), cfg)
        assert np.array_equal(radio_map.values, np.zeros(16))

    def test_training_consistency(self, rng: np.random.Generator) -> None:
        """Predicting at the training points should give G alpha."""
        cfg = EmbeddingConfig()
        E = embed_positions(rng.uniform(0, 100, size=(25, 2)), cfg)
        system = build_system(E, 1e-2)
        alpha = rng.standard_normal(25)
        assert np.allclose(predict(E, alpha, E), system.apply_kernel(alpha))

    def test_grid_matches_embedded_prediction(self, rng: np.random.Generator) -> None:
        """Grid maps should use the same feature map as the training points."""
        cfg = EmbeddingConfig()
        grid = GridSpec(rows=3, cols=4)
        E = embed_positions(rng.uniform(0, 100, size=(8, 2)), cfg)
        alpha = rng.standard_normal(8)
        expected = predict(E, alpha, embed_positions(grid.points(), cfg))
        assert np.allclose(reconstruct_map(E, alpha, grid, cfg).values, expected)


class TestGprt:
    """Tests for the rational quadratic Gaussian-process baseline."""

    def test_infinite_noise_limit(self, rng: np.random.Generator) -> None:
        """Huge noise should shrink predictions toward zero."""
        X = rng.uniform(0, 100, size=(20, 2))
        y = rng.normal(-70, 5, size=20)
        radio_map = gprt_fit_predict(X, y, GridSpec(rows=5, cols=5), GprtConfig(noise_var=1e8))
        assert np.max(np.abs(radio_map.values)) <= 1e-5 * np.max(np.abs(y))

    def test_interpolation_limit(self, rng: np.random.Generator) -> None:
        """Tiny noise should reproduce the training values."""
        grid = GridSpec(rows=3, cols=3)
        X = grid.points()
        y = rng.normal(-70, 5, size=9)
        cfg = GprtConfig(length_scale=(10.0, 10.0), noise_var=1e-8)
        radio_map = gprt_fit_predict(X, y, grid, cfg)
        assert np.all(np.abs(radio_map.values - y) <= 1e-3 * np.abs(y))

    def test_squared_exponential_limit(self, rng: np.random.Generator) -> None:
        """A large shape parameter should approach the squared-exponential kernel."""
        X = rng.uniform(0, 50, size=(10, 2))
        cfg = GprtConfig(rq_alpha=1e4, length_scale=(20.0, 20.0))
        d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
        assert np.allclose(rq_kernel(X, X, cfg), np.exp(-d2 / (2 * 20.0**2)), atol=1e-3)

    def test_anisotropic_length_scales(self) -> None:
        """Per-axis length scales should weight the axes separately."""
        cfg = GprtConfig(length_scale=(10.0, 40.0))
        origin = np.zeros((1, 2))
        along_x = rq_kernel(origin, np.array([[20.0, 0.0]]), cfg)[0, 0]
        along_y = rq_kernel(origin, np.array([[0.0, 20.0]]), cfg)[0, 0]
        assert along_y > along_x

    def test_permutation_invariance(self, rng: np.random.Generator) -> None:
        """Relabeling training points should not change the map."""
        X = rng.uniform(0, 100, size=(30, 2))
        y = rng.normal(-70, 5, size=30)
        perm = rng.permutation(30)
        grid = GridSpec(rows=6, cols=6)
        a = gprt_fit_predict(X, y, grid)
        b = gprt_fit_predict(X[perm], y[perm], grid)
        assert np.allclose(a.values, b.values, atol=1e-8)

    def test_tuning_picks_grid_candidate(self) -> None:
        """Tuning should return one of the candidate settings."""
        model = generate_field(FieldConfig(), 0)
        grid = GridSpec(rows=9, cols=9)
        m = sample_measurements(model, 40, 1.5, seed=2)
        cfg = tune_gprt(m.positions, m.values, grid, truth_map(model, grid))
        assert cfg.length_scale[0] in (10.0, 20.0, 40.0)
        assert cfg.noise_var in (0.5, 2.25, 4.0)


class TestMetrics:
    """Tests for the evaluation metrics."""

    def test_reference_against_itself(self, example_system) -> None:
        """The reference should have zero gap and discrepancy."""
        alpha_ref = reference_solve(example_system, EXAMPLE_Y)
        record = evaluate(example_system, alpha_ref, alpha_ref, EXAMPLE_Y)
        assert record.obj_gap == 0.0
        assert record.pred_disc == 0.0
        assert record.residual is not None
        assert record.residual <= 1e-12

    def test_hand_residual(self) -> None:
        """G = I, lambda = 1, y = (2, 0): alpha = (1.1, 0) has residual 0.1."""
        system = AttentionKernelSystem(G=np.eye(2), lam=1.0)
        y = np.array([2.0, 0.0])
        exact = evaluate(system, [1.0, 0.0], [1.0, 0.0], y)
        perturbed = evaluate(system, [1.1, 0.0], [1.0, 0.0], y)
        assert exact.residual == pytest.approx(0.0)
        assert perturbed.residual == pytest.approx(0.1)
        assert perturbed.pred_disc == pytest.approx(0.1)

    def test_zero_rhs(self, example_system) -> None:
        """A zero right-hand side has no relative residual."""
        with pytest.raises(ZeroDenominatorError):
            evaluate(example_system, np.zeros(3), np.zeros(3), np.zeros(3))

    def test_perfect_map(self) -> None:
        """A map equal to the truth has zero error."""
        truth = truth_map(generate_field(FieldConfig(), 1), GridSpec(rows=5, cols=5))
        assert map_errors(truth, truth) == (0.0, 0.0)

    def test_nmse_identity(self, rng: np.random.Generator) -> None:
        """NMSE should equal RMSE^2 M / sum r^2."""
        grid = GridSpec(rows=6, cols=7)
        truth = RadioMap(grid=grid, values=rng.normal(-70, 5, size=42))
        hat = RadioMap(grid=grid, values=truth.values + rng.normal(0, 1, size=42))
        rmse, nmse = map_errors(hat, truth)
        expected = rmse**2 * 42 / np.sum(truth.values**2)
        assert nmse == pytest.approx(expected, rel=1e-12)

    def test_zero_truth(self) -> None:
        """An all-zero truth map has no NMSE."""
        grid = GridSpec(rows=2, cols=2)
        zero = RadioMap(grid=grid, values=np.zeros(4))
        with pytest.raises(ZeroDenominatorError):
            map_errors(zero, zero)


class TestMapOutputs:
    """Tests for map serialization and derived views."""

    def test_csv_layout(self, tmp_path) -> None:
        """The CSV should carry one row per grid point with the fixed header."""
        grid = GridSpec(rows=3, cols=4)
        radio_map = RadioMap(grid=grid, values=np.arange(12.0))
        path = radio_map.to_csv(tmp_path / "map.csv")
        df = pd.read_csv(path)
        assert list(df.columns) == MAP_CSV_COLUMNS
        assert len(df) == 12
        assert df.loc[5, "row"] == 1
        assert df.loc[5, "col"] == 1
        assert df.loc[5, "value_dbm"] == 5.0

    def test_discrepancy(self) -> None:
        """The discrepancy map should be |a - b|."""
        grid = GridSpec(rows=2, cols=2)
        a = RadioMap(grid=grid, values=np.array([1.0, 2.0, 3.0, 4.0]))
        b = RadioMap(grid=grid, values=np.array([2.0, 2.0, 1.0, 5.0]))
        assert np.array_equal(discrepancy_map(a, b).values, [1.0, 0.0, 2.0, 1.0])

    def test_mid_row_slice(self) -> None:
        """The slice should be the middle grid row."""
        grid = GridSpec(rows=5, cols=3)
        radio_map = RadioMap(grid=grid, values=np.arange(15.0))
        df = mid_row_slice(radio_map)
        assert list(df["value_dbm"]) == [6.0, 7.0, 8.0]
        assert list(df["x"]) == [0.0, 50.0, 100.0]
