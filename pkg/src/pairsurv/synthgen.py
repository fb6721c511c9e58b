"""Synthetic competing-risks benchmark generator.

Two competing event processes over three standard-normal covariates: the
time to event k is exponential with mean exp((x3)^2 + xk), so x1 drives
only cause 1, x2 only cause 2, and x3 both. The observed event is the
earlier of the two; a fixed fraction of subjects, chosen uniformly at
random, is right-censored at a time drawn uniformly between 0 and their
(unobserved) earliest event time.

The exponential mean is the exponential of the covariate expression: the
expression itself can be negative, so it cannot serve as a mean directly.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import data
from .data import Dataset, FeatureSchema, FeatureSpec
from .errors import ConfigError

SYNTH_SCHEMA = FeatureSchema(
    (FeatureSpec("x1", "real"), FeatureSpec("x2", "real"), FeatureSpec("x3", "real"))
)

NUM_CAUSES = 2


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 30_000
    censor_fraction: float = 0.5
    seed: int = 0
    k: int = 30  # discretization grid size

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ConfigError(f"need at least 2 subjects, got {self.n_subjects}")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ConfigError(
                f"censor fraction must lie in [0, 1), got {self.censor_fraction}"
            )
        if self.k < 2:
            raise ConfigError(f"grid size must be >= 2, got {self.k}")


def event_time_means(x: np.ndarray) -> np.ndarray:
    """Mean event time per cause, shape (n, 2)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    quad = x[:, 2] ** 2
    return np.exp(np.column_stack([quad + x[:, 0], quad + x[:, 1]]))


def draw_cohort(config: SynthConfig, rng: np.random.Generator | None = None):
    """Sample covariates, continuous observed times, and event labels.

    Exactly round(n * censor_fraction) subjects are censored.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n_subjects
    x = rng.standard_normal((n, 3))
    means = event_time_means(x)
    t1 = rng.exponential(means[:, 0])
    t2 = rng.exponential(means[:, 1])
    earliest = np.minimum(t1, t2)
    event = np.where(t1 <= t2, 1, 2).astype(np.int64)
    time = earliest.copy()
    n_censor = int(round(n * config.censor_fraction))
    censored = rng.choice(n, size=n_censor, replace=False)
    time[censored] = rng.uniform(0.0, earliest[censored])
    event[censored] = 0
    return x, time, event


def generate(config: SynthConfig, rng: np.random.Generator | None = None) -> Dataset:
    """Draw a cohort and discretize it onto a quantile grid."""
    x, time, event = draw_cohort(config, rng)
    grid, idx = data.discretize(time, config.k)
    return Dataset(
        x=x,
        time_index=idx,
        event=event,
        grid=grid,
        feature_names=SYNTH_SCHEMA.names,
        num_causes=NUM_CAUSES,
        schema=SYNTH_SCHEMA,
    )


def oracle_risk(x: np.ndarray, cause: int, t) -> np.ndarray:
    """True cumulative incidence of ``cause`` by time ``t`` under the generator.

    With per-cause rates r_k = 1/mean_k, competing exponentials give
    F(t, cause | x) = r_cause / (r_1 + r_2) * (1 - exp(-(r_1 + r_2) * t)).
    """
    if cause not in (1, 2):
        raise ValueError(f"cause {cause} outside 1..2")
    means = event_time_means(x)
    rates = 1.0 / means
    total = rates.sum(axis=1)
    share = rates[:, cause - 1] / total
    t = np.asarray(t, dtype=np.float64)
    return share * -np.expm1(-total * t)


def oracle_cif(x: np.ndarray, grid: data.TimeGrid) -> np.ndarray:
    """True incidence curves as a risk matrix, shape (n, 2, K).

    Column k is evaluated at the midpoint of grid bin k rather than at its
    lower boundary: the first boundary is 0, where every subject's true risk
    is identically zero and carries no ranking information. The last (open)
    bin uses its boundary plus half the final gap.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    b = grid.boundaries
    mids = np.empty(grid.k)
    mids[:-1] = (b[:-1] + b[1:]) / 2.0
    mids[-1] = b[-1] + (b[-1] - b[-2]) / 2.0
    out = np.empty((x.shape[0], NUM_CAUSES, grid.k))
    for cause in (1, 2):
        for j, t in enumerate(mids):
            out[:, cause - 1, j] = oracle_risk(x, cause, t)
    return out


def write_cohort(path, config: SynthConfig) -> dict:
    """Write the cohort CSV plus sidecars; returns a summary of what was drawn.

    Sidecars: ``<path>.schema`` (feature kinds) and ``<path>.meta.json``
    (generator config and empirical label counts, enough for exact replay).
    """
    x, time, event = draw_cohort(config)
    data.write_csv(
        path,
        SYNTH_SCHEMA,
        time,
        event,
        {"x1": x[:, 0], "x2": x[:, 1], "x3": x[:, 2]},
    )
    SYNTH_SCHEMA.save(f"{path}.schema")
    summary = {
        "generator": asdict(config),
        "num_causes": NUM_CAUSES,
        "n_subjects": int(len(time)),
        "censored": int((event == 0).sum()),
        "cause_counts": {str(m): int((event == m).sum()) for m in (1, 2)},
    }
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
