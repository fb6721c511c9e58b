import numpy as np
import pytest

from pairsurv.data import Dataset, FeatureSchema, FeatureSpec, TimeGrid


def random_dataset(
    rng: np.random.Generator,
    n: int,
    num_causes: int = 2,
    k: int = 6,
    n_features: int = 3,
    censor_frac: float = 0.3,
) -> Dataset:
    """Small random dataset directly on a grid (no discretization step)."""
    x = rng.standard_normal((n, n_features))
    time_index = rng.integers(0, k, size=n)
    event = rng.integers(1, num_causes + 1, size=n)
    censored = rng.random(n) < censor_frac
    event[censored] = 0
    grid = TimeGrid(np.arange(k, dtype=float))
    schema = FeatureSchema(
        tuple(FeatureSpec(f"x{j}", "real") for j in range(n_features))
    )
    return Dataset(
        x=x,
        time_index=time_index,
        event=event,
        grid=grid,
        feature_names=[f"x{j}" for j in range(n_features)],
        num_causes=num_causes,
        schema=schema,
    )


def random_cif(rng: np.random.Generator, n: int, num_causes: int, k: int) -> np.ndarray:
    """Valid random incidence curves: nonneg increments, total mass < 1."""
    inc = rng.random((n, num_causes, k))
    inc /= inc.sum(axis=(1, 2), keepdims=True) * (1.0 + rng.random((n, 1, 1)))
    return np.cumsum(inc, axis=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
