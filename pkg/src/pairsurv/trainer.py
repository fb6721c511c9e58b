"""Training loop and cross-validation driver.

One training step samples a batch of comparable pairs with replacement,
runs both pair members through the shared network, evaluates the pairwise
objective, and applies one Adam update under a decaying learning rate.
Periodic validation computes the per-cause discrimination index; the
checkpoint with the best mean validation index is returned.

Everything is iteration-counted; there is no epoch notion, because the
pair population is far larger than the subject population.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, stratified_split
from .errors import ConfigError, DataError, NumericError
from .loss import BatchCifs, LossConfig, total_loss
from .metrics import CtReport, c_index, evaluate_report
from .model import Model, ModelConfig, save_model
from .numcore import AdamState, Tape, adam_step, backward, ops
from .pairs import build_pair_index, ipw_weights, sample_batch


@dataclass(frozen=True)
class TrainConfig:
    hidden_layers: int = 2
    hidden_width: int = 40
    dropout_rate: float = 0.35
    batch_size: int = 2048
    iterations: int = 10_000
    eval_every: int = 1_000
    base_lr: float = 1e-3
    lr_decay_iters: float = 10_000.0
    # Alternative schedule lr(i) = 1/(base_lr + i). Starts at 1/base_lr,
    # which is enormous for the default base_lr; off unless asked for.
    reciprocal_lr: bool = False
    disc_scale: float = 500.0
    acc_scale: float = 500.0
    interp_weight: float = 0.01
    folds: int = 5
    bootstrap_reps: int = 1_000
    ci_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.base_lr < 0:
            raise ConfigError(f"base learning rate must be >= 0, got {self.base_lr}")
        if self.reciprocal_lr and self.base_lr <= 0:
            raise ConfigError("the reciprocal schedule needs a positive base_lr")
        if self.lr_decay_iters <= 0:
            raise ConfigError("lr_decay_iters must be positive")
        if self.folds < 3:
            raise ConfigError(f"need at least 3 folds, got {self.folds}")
        if self.bootstrap_reps < 1:
            raise ConfigError("bootstrap_reps must be >= 1")
        if not 0 < self.ci_level < 1:
            raise ConfigError("ci_level must lie in (0, 1)")

    def loss_config(self) -> LossConfig:
        return LossConfig(
            disc_scale=self.disc_scale,
            acc_scale=self.acc_scale,
            interp_weight=self.interp_weight,
        )


def load_train_config(path, base: TrainConfig | None = None) -> TrainConfig:
    """Read a JSON config file whose keys override the defaults."""
    base = base or TrainConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return dataclasses.replace(base, **overrides)


def lr_at(i: int, config: TrainConfig) -> float:
    """Learning rate at iteration i.

    Default: base_lr / (1 + i / lr_decay_iters), a smooth decay anchored at
    the base rate. The reciprocal flag switches to 1 / (base_lr + i).
    """
    if i < 0:
        raise ValueError(f"iteration must be >= 0, got {i}")
    if config.reciprocal_lr:
        return 1.0 / (config.base_lr + i)
    return config.base_lr / (1.0 + i / config.lr_decay_iters)


@dataclass(frozen=True)
class EvalRecord:
    iteration: int
    loss_total: float
    loss_discrimination: float
    loss_accuracy: float
    loss_interpolation: float
    val_c: tuple[float, ...]  # per cause; nan where undefined on the split
    mean_val_c: float


@dataclass
class TrainHistory:
    records: list[EvalRecord] = field(default_factory=list)
    best_iteration: int = -1


def _validation_c(model: Model, validation: Dataset) -> tuple[tuple[float, ...], float]:
    cif = model.predict_cif(validation.x)
    per_cause = []
    for cause in range(1, validation.num_causes + 1):
        try:
            per_cause.append(c_index(validation, cif, cause))
        except DataError:
            per_cause.append(float("nan"))
    defined = [c for c in per_cause if not np.isnan(c)]
    if not defined:
        raise DataError("validation split has no comparable pairs for any cause")
    return tuple(per_cause), float(np.mean(defined))


def train(
    train_set: Dataset, validation: Dataset, config: TrainConfig
) -> tuple[Model, TrainHistory]:
    """Train one model and return the best validation checkpoint.

    Bit-reproducible for a fixed seed: initialization, batch sampling, and
    dropout each consume their own deterministic random stream.
    """
    index = ipw_weights(build_pair_index(train_set))
    if index.total_pairs == 0:
        raise DataError("training split has no comparable pairs")
    init_ss, batch_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(3)
    model_cfg = ModelConfig(
        input_dim=train_set.n_features,
        hidden_layers=config.hidden_layers,
        hidden_width=config.hidden_width,
        num_causes=train_set.num_causes,
        num_intervals=train_set.grid.k,
        dropout_rate=config.dropout_rate,
        seed=config.seed,
    )
    model = Model.init(model_cfg, np.random.default_rng(init_ss))
    rng_batch = np.random.default_rng(batch_ss)
    rng_drop = np.random.default_rng(drop_ss)
    adam = AdamState.for_params(model.parameters())
    loss_cfg = config.loss_config()
    history = TrainHistory()
    best_mean = -np.inf
    best_params = None
    b = config.batch_size
    x = train_set.x
    for i in range(config.iterations):
        batch = sample_batch(index, b, rng_batch)
        stacked = np.concatenate([x[batch.left], x[batch.right]], axis=0)
        tape = Tape()
        try:
            out = model.forward(stacked, training=True, rng=rng_drop, tape=tape)
            cifs = BatchCifs(
                left=ops.slice_rows(out.cif, 0, b),
                right=ops.slice_rows(out.cif, b, 2 * b),
            )
            loss = total_loss(batch, cifs, loss_cfg)
        except NumericError as exc:
            raise NumericError(f"training aborted at iteration {i}: {exc}") from exc
        grads = backward(tape, loss.total)
        grad_arrays = [grads.wrt(leaf) for leaf in out.param_leaves]
        model.set_parameters(
            adam_step(adam, model.parameters(), grad_arrays, lr_at(i, config))
        )
        step = i + 1
        if step % config.eval_every == 0 or step == config.iterations:
            per_cause, mean_c = _validation_c(model, validation)
            comps = loss.components()
            history.records.append(
                EvalRecord(
                    iteration=step,
                    loss_total=comps["total"],
                    loss_discrimination=comps["discrimination"],
                    loss_accuracy=comps["accuracy"],
                    loss_interpolation=comps["interpolation"],
                    val_c=per_cause,
                    mean_val_c=mean_c,
                )
            )
            if mean_c > best_mean:
                best_mean = mean_c
                best_params = [p.copy() for p in model.parameters()]
                history.best_iteration = step
    if best_params is not None:
        model.set_parameters(best_params)
    return model, history


@dataclass
class AggregateRow:
    kind: str  # mean | min | max (min/max select the extreme fold's row)
    cause: int
    point: float
    lower: float
    upper: float
    numerator: float
    denominator: float


@dataclass
class FoldResult:
    fold: int
    report: CtReport
    history: TrainHistory
    model: Model


@dataclass
class CvResult:
    folds: list[FoldResult]
    aggregate: list[AggregateRow]


def _aggregate(folds: list[FoldResult], num_causes: int) -> list[AggregateRow]:
    rows = []
    for cause in range(1, num_causes + 1):
        per_fold = [f.report.by_cause(cause) for f in folds]
        points = [r.point for r in per_fold]
        rows.append(
            AggregateRow(
                "mean", cause,
                float(np.mean(points)),
                float(np.mean([r.lower for r in per_fold])),
                float(np.mean([r.upper for r in per_fold])),
                float(np.mean([r.numerator for r in per_fold])),
                float(np.mean([r.denominator for r in per_fold])),
            )
        )
        for kind, pick in (("min", int(np.argmin(points))), ("max", int(np.argmax(points)))):
            r = per_fold[pick]
            rows.append(
                AggregateRow(kind, cause, r.point, r.lower, r.upper,
                             float(r.numerator), float(r.denominator))
            )
    return rows


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def run_cv(dataset: Dataset, config: TrainConfig, out_dir=None) -> CvResult:
    """5-fold cross-validation: train on 60%, select on 20%, report on 20%.

    When ``out_dir`` is given, writes ``config.json``, ``history.csv``,
    ``report.csv`` and one checkpoint per fold. All outputs are functions
    of (data, config, seed) only; nothing is timestamped.
    """
    splits = stratified_split(dataset, folds=config.folds, seed=config.seed)
    fold_results = []
    for fold, split in enumerate(splits):
        fold_cfg = dataclasses.replace(config, seed=_fold_seed(config.seed, fold))
        model, history = train(split.train, split.validation, fold_cfg)
        cif = model.predict_cif(split.test.x)
        report = evaluate_report(
            split.test,
            cif,
            reps=config.bootstrap_reps,
            level=config.ci_level,
            seed=np.random.SeedSequence([config.seed, fold, 1]),
        )
        fold_results.append(FoldResult(fold, report, history, model))
    result = CvResult(fold_results, _aggregate(fold_results, dataset.num_causes))
    if out_dir is not None:
        _write_run_dir(out_dir, dataset, config, result)
    return result


def _write_run_dir(out_dir, dataset: Dataset, config: TrainConfig, result: CvResult) -> None:
    os.makedirs(out_dir, exist_ok=True)
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    snapshot = {
        "train": dataclasses.asdict(config),
        "data": {
            "n_subjects": len(dataset),
            "n_features": dataset.n_features,
            "num_causes": dataset.num_causes,
            "num_intervals": dataset.grid.k,
            "censoring_rate": dataset.censoring_rate(),
            "grid_boundaries": [float(b) for b in dataset.grid.boundaries],
        },
    }
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "history.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        cause_cols = [f"val_c_{m}" for m in range(1, dataset.num_causes + 1)]
        writer.writerow(
            ["fold", "iteration", "loss_total", "loss_discrimination",
             "loss_accuracy", "loss_interpolation"] + cause_cols + ["mean_val_c"]
        )
        for f in result.folds:
            for rec in f.history.records:
                writer.writerow(
                    [f.fold, rec.iteration, repr(rec.loss_total),
                     repr(rec.loss_discrimination), repr(rec.loss_accuracy),
                     repr(rec.loss_interpolation)]
                    + [repr(c) for c in rec.val_c]
                    + [repr(rec.mean_val_c)]
                )
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "cause", "point", "lo", "hi", "numerator", "denominator"])
        for f in result.folds:
            for row in f.report.causes:
                writer.writerow(
                    [f.fold, row.cause, repr(row.point), repr(row.lower),
                     repr(row.upper), repr(row.numerator), row.denominator]
                )
        for agg in result.aggregate:
            writer.writerow(
                [agg.kind, agg.cause, repr(agg.point), repr(agg.lower),
                 repr(agg.upper), repr(agg.numerator), repr(agg.denominator)]
            )
    for f in result.folds:
        save_model(
            f.model,
            os.path.join(ckpt_dir, f"fold{f.fold}.npz"),
            grid=dataset.grid,
            feature_names=dataset.feature_names,
        )
