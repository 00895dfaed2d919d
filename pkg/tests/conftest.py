"""Shared test fixtures for laker-crunchtools tests."""

from collections.abc import Generator

import numpy as np
import pytest

from laker_crunchtools.kernel import AttentionKernelSystem, build_system, embed_positions
from laker_crunchtools.models import EmbeddingConfig, ExperimentConfig, GridSpec

EXAMPLE_EMBEDDINGS = np.array([[0.241, 0.444], [-0.336, 0.112], [-0.220, 0.353]])
EXAMPLE_Y = np.array([-66.14, -65.77, -77.30])
EXAMPLE_LAMBDA = 0.1
EXAMPLE_QUERY = np.array([0.051, 0.452])
# Exact solution for the rounded embeddings above.
EXAMPLE_ALPHA_EXACT = np.array([0.8275, 5.4043, -65.3837])


@pytest.fixture(autouse=True)
def _reset_config_singleton() -> Generator[None, None, None]:
    """Reset the global config singleton between tests."""
    import laker_crunchtools.config as config_mod

    config_mod._config = None
    yield
    config_mod._config = None


@pytest.fixture
def example_system() -> AttentionKernelSystem:
    return build_system(EXAMPLE_EMBEDDINGS, EXAMPLE_LAMBDA)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def make_operator(diag_g: np.ndarray | list[float], lam: float = 1.0) -> AttentionKernelSystem:
    """Analytic operator lambda I + diag(diag_g)."""
    return AttentionKernelSystem(G=np.diag(np.asarray(diag_g, dtype=np.float64)), lam=lam)


def sampled_system(n: int, lam: float = 1e-2, seed: int = 0) -> AttentionKernelSystem:
    """Attention system on n uniform positions with the default feature map."""
    positions = np.random.default_rng(seed).uniform(0.0, 100.0, size=(n, 2))
    return build_system(embed_positions(positions, EmbeddingConfig()), lam)


def small_experiment(**overrides: object) -> ExperimentConfig:
    """Sweep definition small enough for unit tests."""
    base: dict[str, object] = {
        "sizes": [30],
        "seeds": [0],
        "methods": ["reference"],
        "gd_budget": 50,
        "grid": GridSpec(rows=9, cols=9),
    }
    base.update(overrides)
    return ExperimentConfig.model_validate(base)
