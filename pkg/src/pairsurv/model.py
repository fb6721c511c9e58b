"""Feed-forward risk model: a shared SELU trunk feeding per-cause heads.

The head layer emits one logit per (cause, time interval) plus a single
event-free slot. A joint softmax turns the logits into interval
probabilities, and prefix sums along the time axis yield the estimated
cumulative incidence of each cause. The softmax construction makes every
incidence curve a valid sub-distribution: entries lie in [0, 1], are
nondecreasing in time, and the per-subject mass over all causes never
exceeds 1.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import TimeGrid
from .errors import ConfigError, DataError
from .numcore import Tape, Tensor, ops

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_layers: int = 2
    hidden_width: int = 40
    num_causes: int = 2
    num_intervals: int = 30
    dropout_rate: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_width < 1:
            raise ConfigError("model dimensions must be >= 1")
        if self.hidden_layers < 0:
            raise ConfigError("hidden layer count must be >= 0")
        if self.num_causes < 1 or self.num_intervals < 1:
            raise ConfigError("need at least one cause and one interval")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(
                f"dropout rate must lie in [0, 1), got {self.dropout_rate}"
            )

    @property
    def head_width(self) -> int:
        return self.num_causes * self.num_intervals + 1


@dataclass
class CifMatrix:
    """Estimated cumulative incidence values, one (causes x intervals)
    block per subject, plus the leftover event-free mass."""

    values: np.ndarray  # (n, num_causes, num_intervals)
    event_free: np.ndarray  # (n,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.event_free = np.asarray(self.event_free, dtype=np.float64)
        if self.values.ndim != 3 or self.event_free.shape != (self.values.shape[0],):
            raise ValueError("CifMatrix needs (n, M, K) values and (n,) free mass")

    @property
    def num_causes(self) -> int:
        return self.values.shape[1]

    @property
    def num_intervals(self) -> int:
        return self.values.shape[2]

    def validate(self, atol: float = 1e-12) -> None:
        v = self.values
        if ((v < 0.0) | (v > 1.0)).any():
            raise ValueError("incidence values outside [0, 1]")
        if (np.diff(v, axis=2) < 0.0).any():
            raise ValueError("incidence values decrease along the time axis")
        # total mass at the horizon; atol absorbs accumulated rounding
        if (v[:, :, -1].sum(axis=1) > 1.0 + atol).any():
            raise ValueError("total incidence mass exceeds 1")


def risk_at(cif: CifMatrix, cause: int, time_index: int) -> np.ndarray:
    """Per-subject risk of ``cause`` by grid point ``time_index``."""
    if not 1 <= cause <= cif.num_causes:
        raise ValueError(f"cause {cause} outside 1..{cif.num_causes}")
    if not 0 <= time_index < cif.num_intervals:
        raise ValueError(
            f"time index {time_index} outside 0..{cif.num_intervals - 1}"
        )
    return cif.values[:, cause - 1, time_index]


@dataclass
class ForwardResult:
    """Tape-tracked outputs of one forward pass."""

    probs: Tensor  # (n, M*K+1) interval probabilities, event-free slot last
    cif: Tensor  # (n, M, K) prefix sums per cause
    param_leaves: list[Tensor] | None  # set when recording on a tape


class Model:
    """MLP with variance-preserving init; parameters are plain float64 arrays."""

    def __init__(self, config: ModelConfig, params: list[np.ndarray]):
        self.config = config
        self._params = params

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator | None = None) -> "Model":
        """Draw trunk and head weights from N(0, 1/fan_in); biases start at 0.

        The 1/fan_in variance keeps pre-activation variance near 1, which the
        self-normalizing activation then preserves through depth.
        """
        if rng is None:
            rng = np.random.default_rng(config.seed)
        params: list[np.ndarray] = []
        fan_in = config.input_dim
        for _ in range(config.hidden_layers):
            params.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, config.hidden_width)))
            params.append(np.zeros(config.hidden_width))
            fan_in = config.hidden_width
        params.append(rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, config.head_width)))
        params.append(np.zeros(config.head_width))
        return cls(config, params)

    def parameters(self) -> list[np.ndarray]:
        return list(self._params)

    def set_parameters(self, params) -> None:
        if len(params) != len(self._params):
            raise ValueError("parameter count mismatch")
        for old, new in zip(self._params, params):
            if old.shape != new.shape:
                raise ValueError("parameter shape mismatch")
        self._params = [np.asarray(p, dtype=np.float64) for p in params]

    def forward(
        self,
        x: np.ndarray,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
        tape: Tape | None = None,
    ) -> ForwardResult:
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != cfg.input_dim:
            raise DataError(
                f"expected covariates of dimension {cfg.input_dim}, "
                f"got shape {x.shape}"
            )
        if tape is not None:
            leaves = [tape.leaf(p) for p in self._params]
        else:
            leaves = [Tensor(p) for p in self._params]
        h = Tensor(x)
        for layer in range(cfg.hidden_layers):
            w, b = leaves[2 * layer], leaves[2 * layer + 1]
            h = ops.add(ops.matmul(h, w), b, label=f"hidden layer {layer}")
            h = ops.selu(h, label=f"hidden layer {layer}")
            if training and cfg.dropout_rate > 0.0:
                h = ops.alpha_dropout(h, cfg.dropout_rate, training, rng)
        logits = ops.add(ops.matmul(h, leaves[-2]), leaves[-1], label="head")
        probs = ops.softmax_rows(logits, label="head")
        core = ops.slice_cols(probs, 0, cfg.num_causes * cfg.num_intervals)
        stacked = ops.reshape(core, (x.shape[0], cfg.num_causes, cfg.num_intervals))
        cif = ops.cumsum_last(stacked)
        return ForwardResult(
            probs=probs,
            cif=cif,
            param_leaves=leaves if tape is not None else None,
        )

    def predict_cif(self, x: np.ndarray) -> CifMatrix:
        """Inference-mode incidence estimates (deterministic)."""
        out = self.forward(x, training=False)
        return CifMatrix(values=out.cif.values, event_free=out.probs.values[:, -1])


@dataclass
class Checkpoint:
    """A saved model plus the training-time grid and feature layout."""

    model: Model
    grid: TimeGrid | None = None
    feature_names: list[str] | None = None


def save_model(
    model: Model,
    path,
    *,
    grid: TimeGrid | None = None,
    feature_names: list[str] | None = None,
) -> None:
    """Bit-exact dump of config + parameters (`.npz`); optionally carries
    the discretization grid and encoded feature names for evaluation."""
    payload = {
        "version": np.asarray(CHECKPOINT_VERSION),
        "config": np.asarray(json.dumps(asdict(model.config))),
    }
    for i, p in enumerate(model.parameters()):
        payload[f"param_{i}"] = p
    if grid is not None:
        payload["grid_boundaries"] = grid.boundaries
    if feature_names is not None:
        payload["feature_names"] = np.asarray(json.dumps(list(feature_names)))
    np.savez(path, **payload)


def load_checkpoint(path) -> Checkpoint:
    try:
        archive = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        if int(archive["version"]) != CHECKPOINT_VERSION:
            raise DataError(
                f"unsupported checkpoint version {int(archive['version'])}"
            )
        config = ModelConfig(**json.loads(str(archive["config"])))
        params = []
        i = 0
        while f"param_{i}" in archive:
            params.append(archive[f"param_{i}"].astype(np.float64))
            i += 1
        grid = None
        if "grid_boundaries" in archive:
            grid = TimeGrid(archive["grid_boundaries"])
        names = None
        if "feature_names" in archive:
            names = json.loads(str(archive["feature_names"]))
    return Checkpoint(model=Model(config, params), grid=grid, feature_names=names)


def load_model(path) -> Model:
    return load_checkpoint(path).model
