"""Discrete-time competing-risks dataset handling.

File formats
------------
Data CSV: UTF-8, comma separated, one header row. The first two columns are
``time`` (nonnegative float) and ``event`` (integer, 0 = censored, 1..M =
cause), followed by the covariate columns in schema order. A missing
covariate cell is an empty string.

Feature schema: a sidecar text file with one ``name:kind`` line per
covariate column, where kind is ``real`` or ``categorical``. Blank lines
and ``#`` comments are ignored.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

CENSORED = 0

FEATURE_KINDS = ("real", "categorical")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def __iter__(self):
        return iter(self.features)

    def __len__(self) -> int:
        return len(self.features)

    @classmethod
    def parse(cls, text: str) -> "FeatureSchema":
        specs = []
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, sep, kind = line.partition(":")
            name, kind = name.strip(), kind.strip()
            if not sep or not name or kind not in FEATURE_KINDS:
                raise DataError(
                    f"schema line {lineno}: expected 'name:real' or "
                    f"'name:categorical', got {raw!r}"
                )
            if name in ("time", "event"):
                raise DataError(f"schema line {lineno}: '{name}' is a reserved column")
            if name in seen:
                raise DataError(f"schema line {lineno}: duplicate feature '{name}'")
            seen.add(name)
            specs.append(FeatureSpec(name, kind))
        if not specs:
            raise DataError("schema defines no covariate columns")
        return cls(tuple(specs))

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise DataError(f"cannot read schema file {path}: {exc}") from exc

    def dumps(self) -> str:
        return "".join(f"{f.name}:{f.kind}\n" for f in self.features)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


@dataclass
class RawTable:
    """Parsed CSV contents prior to imputation/encoding.

    Real columns hold float arrays with NaN marking missing cells;
    categorical columns hold string lists with None marking missing cells.
    """

    time: np.ndarray
    event: np.ndarray
    real: dict = field(default_factory=dict)
    categorical: dict = field(default_factory=dict)
    schema: FeatureSchema | None = None

    def __len__(self) -> int:
        return len(self.time)


def load_csv(path, schema: FeatureSchema, num_causes: int | None = None) -> RawTable:
    """Parse and validate a data CSV against a feature schema.

    Row numbers in error messages count data rows from 1 (excluding the
    header). When ``num_causes`` is given, event labels above it are
    rejected here; otherwise the number of causes is inferred downstream.
    """
    expected = ["time", "event"] + schema.names
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        if header != expected:
            raise DataError(
                f"{path}: header {header!r} does not match schema columns {expected!r}"
            )
        times: list[float] = []
        events: list[int] = []
        real = {f.name: [] for f in schema if f.kind == "real"}
        cat = {f.name: [] for f in schema if f.kind == "categorical"}
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(expected):
                raise DataError(
                    f"row {rownum}: expected {len(expected)} cells, got {len(row)}"
                )
            try:
                t = float(row[0])
            except ValueError:
                raise DataError(f"row {rownum}, column 'time': unparseable value {row[0]!r}") from None
            if not np.isfinite(t) or t < 0:
                raise DataError(f"row {rownum}, column 'time': time must be a finite nonnegative number, got {row[0]!r}")
            try:
                ev = int(row[1])
            except ValueError:
                raise DataError(f"row {rownum}, column 'event': unparseable value {row[1]!r}") from None
            if ev < 0 or (num_causes is not None and ev > num_causes):
                upper = num_causes if num_causes is not None else "M"
                raise DataError(
                    f"row {rownum}, column 'event': label {ev} outside 0..{upper}"
                )
            times.append(t)
            events.append(ev)
            for spec, cell in zip(schema, row[2:]):
                if spec.kind == "real":
                    if cell == "":
                        real[spec.name].append(np.nan)
                    else:
                        try:
                            real[spec.name].append(float(cell))
                        except ValueError:
                            raise DataError(
                                f"row {rownum}, column '{spec.name}': unparseable value {cell!r}"
                            ) from None
                else:
                    cat[spec.name].append(None if cell == "" else cell)
    return RawTable(
        time=np.asarray(times, dtype=np.float64),
        event=np.asarray(events, dtype=np.int64),
        real={k: np.asarray(v, dtype=np.float64) for k, v in real.items()},
        categorical=cat,
        schema=schema,
    )


def impute(table: RawTable, schema: FeatureSchema | None = None) -> RawTable:
    """Fill missing cells: column mean for real features, column mode for
    categorical ones (ties broken by the smallest category code, i.e. the
    lexicographically smallest category). Idempotent."""
    schema = schema or table.schema
    if schema is None:
        raise ValueError("impute requires a feature schema")
    real = {}
    for name, col in table.real.items():
        missing = np.isnan(col)
        if missing.all():
            raise DataError(f"column '{name}': all values missing, cannot impute")
        if missing.any():
            col = np.where(missing, col[~missing].mean(), col)
        real[name] = col.copy()
    cat = {}
    for name, col in table.categorical.items():
        observed = [c for c in col if c is not None]
        if not observed:
            raise DataError(f"column '{name}': all values missing, cannot impute")
        levels = sorted(set(observed))
        counts = {lv: 0 for lv in levels}
        for c in observed:
            counts[c] += 1
        best = max(counts.values())
        mode = next(lv for lv in levels if counts[lv] == best)
        cat[name] = [mode if c is None else c for c in col]
    return RawTable(
        time=table.time.copy(),
        event=table.event.copy(),
        real=real,
        categorical=cat,
        schema=schema,
    )


def encode(table: RawTable, schema: FeatureSchema | None = None):
    """One-hot encode categorical columns and assemble the covariate matrix.

    Returns ``(x, names)`` where columns follow schema order with each
    categorical column expanded into one indicator per category, ordered by
    category code. The table must be complete (no missing cells).
    """
    schema = schema or table.schema
    if schema is None:
        raise ValueError("encode requires a feature schema")
    cols = []
    names = []
    for spec in schema:
        if spec.kind == "real":
            col = table.real[spec.name]
            if np.isnan(col).any():
                raise DataError(f"column '{spec.name}': missing values, impute first")
            cols.append(col.astype(np.float64))
            names.append(spec.name)
        else:
            col = table.categorical[spec.name]
            if any(c is None for c in col):
                raise DataError(f"column '{spec.name}': missing values, impute first")
            arr = np.asarray(col, dtype=object)
            for level in sorted(set(col)):
                cols.append((arr == level).astype(np.float64))
                names.append(f"{spec.name}={level}")
    x = np.column_stack(cols) if cols else np.empty((len(table), 0))
    return x, names


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing discrete horizon with the origin at 0."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64)
        object.__setattr__(self, "boundaries", b)
        if b.ndim != 1 or len(b) < 2:
            raise DataError(f"time grid needs at least 2 points, got {len(b)}")
        if b[0] != 0.0:
            raise DataError(f"time grid must start at 0, got {b[0]}")
        if not (np.diff(b) > 0).all():
            raise DataError("time grid boundaries must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.boundaries)


def discretize(times, k: int):
    """Build a quantile time grid and map each time onto it.

    Boundaries are the empirical quantiles of all observed times at levels
    j/k for j = 0..k-1 (taken at data values), with the first boundary
    forced to 0 and duplicate boundaries collapsed. Each time maps to the
    largest grid index whose boundary does not exceed it.
    """
    times = np.asarray(times, dtype=np.float64)
    if k < 2:
        raise ConfigError(f"discretization needs k >= 2, got {k}")
    if times.size == 0:
        raise DataError("cannot discretize an empty time column")
    if (times < 0).any() or not np.isfinite(times).all():
        raise DataError("times must be finite and nonnegative")
    levels = np.arange(k) / k
    bounds = np.quantile(times, levels, method="higher")
    bounds[0] = 0.0
    bounds = np.unique(bounds)
    if len(bounds) < k:
        warnings.warn(
            f"time grid collapsed from {k} to {len(bounds)} points "
            "(duplicate quantiles)",
            RuntimeWarning,
            stacklevel=2,
        )
    if len(bounds) < 2:
        raise DataError("all times are 0; time grid collapsed to a single point")
    grid = TimeGrid(bounds)
    return grid, assign_bins(times, grid)


def assign_bins(times, grid: TimeGrid) -> np.ndarray:
    """Largest grid index whose boundary is <= each time."""
    times = np.asarray(times, dtype=np.float64)
    if (times < 0).any():
        raise DataError("times must be nonnegative")
    return (np.searchsorted(grid.boundaries, times, side="right") - 1).astype(np.int64)


@dataclass(frozen=True)
class Subject:
    """One sample: covariates, grid index of its time, and event label."""

    covariates: np.ndarray
    time_index: int
    event: int


@dataclass
class Dataset:
    """Columnar competing-risks dataset on a discrete time grid."""

    x: np.ndarray
    time_index: np.ndarray
    event: np.ndarray
    grid: TimeGrid
    feature_names: list[str]
    num_causes: int
    schema: FeatureSchema | None = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.time_index = np.asarray(self.time_index, dtype=np.int64)
        self.event = np.asarray(self.event, dtype=np.int64)
        n = len(self.time_index)
        if self.x.ndim != 2 or self.x.shape[0] != n or len(self.event) != n:
            raise DataError("dataset arrays have inconsistent lengths")
        if n == 0:
            raise DataError("dataset contains no subjects")
        if self.x.shape[1] != len(self.feature_names):
            raise DataError("feature names do not match covariate columns")
        if not np.isfinite(self.x).all():
            raise DataError("covariates contain non-finite values after imputation")
        if self.num_causes < 1:
            raise DataError("dataset needs at least one cause")
        if self.event.min() < 0 or self.event.max() > self.num_causes:
            raise DataError(f"event labels outside 0..{self.num_causes}")
        if self.time_index.min() < 0 or self.time_index.max() >= self.grid.k:
            raise DataError("time index outside the grid")

    def __len__(self) -> int:
        return len(self.time_index)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subject(self, i: int) -> Subject:
        return Subject(self.x[i], int(self.time_index[i]), int(self.event[i]))

    @property
    def subjects(self) -> list[Subject]:
        return [self.subject(i) for i in range(len(self))]

    def censoring_rate(self) -> float:
        return float((self.event == CENSORED).mean())

    def event_counts(self) -> dict[int, int]:
        return {m: int((self.event == m).sum()) for m in range(self.num_causes + 1)}

    def select(self, ids) -> "Dataset":
        ids = np.asarray(ids, dtype=np.int64)
        return Dataset(
            x=self.x[ids],
            time_index=self.time_index[ids],
            event=self.event[ids],
            grid=self.grid,
            feature_names=list(self.feature_names),
            num_causes=self.num_causes,
            schema=self.schema,
        )


def load_dataset(
    path,
    schema_path,
    *,
    k: int = 30,
    num_causes: int | None = None,
    grid: TimeGrid | None = None,
) -> Dataset:
    """CSV -> imputed, encoded, discretized dataset.

    When ``grid`` is given (evaluating against a trained model's horizon)
    times are binned onto it instead of re-deriving quantiles.
    """
    schema = FeatureSchema.load(schema_path)
    table = impute(load_csv(path, schema, num_causes=num_causes))
    x, names = encode(table)
    if grid is None:
        grid, idx = discretize(table.time, k)
    else:
        idx = assign_bins(table.time, grid)
    if num_causes is None:
        num_causes = int(table.event.max())
        if num_causes < 1:
            raise DataError("every subject is censored; cannot infer causes")
    return Dataset(
        x=x,
        time_index=idx,
        event=table.event,
        grid=grid,
        feature_names=names,
        num_causes=num_causes,
        schema=schema,
    )


def write_csv(path, schema: FeatureSchema, time, event, columns: dict) -> None:
    """Write a data CSV in the package format (full float precision)."""
    time = np.asarray(time)
    event = np.asarray(event)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "event"] + schema.names)
        for i in range(len(time)):
            row = [repr(float(time[i])), str(int(event[i]))]
            for spec in schema:
                cell = columns[spec.name][i]
                row.append(repr(float(cell)) if spec.kind == "real" else str(cell))
            writer.writerow(row)


@dataclass
class FoldSplit:
    """One cross-validation fold: 60% train, 20% validation, 20% test."""

    train: Dataset
    validation: Dataset
    test: Dataset
    train_ids: np.ndarray
    validation_ids: np.ndarray
    test_ids: np.ndarray


def stratified_split(dataset: Dataset, folds: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Deal subjects round-robin into folds within each event label.

    The fold buckets serve as test sets; fold f validates on bucket f+1
    (mod folds) and trains on the rest, so censorship and cause rates stay
    fixed across folds up to +-1 subject per stratum.
    """
    if folds < 3:
        # one bucket tests, one validates: fewer than 3 leaves nothing to train on
        raise ConfigError(f"need at least 3 folds, got {folds}")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    small = []
    for label in range(dataset.num_causes + 1):
        ids = np.flatnonzero(dataset.event == label)
        if len(ids) == 0:
            continue
        if len(ids) < folds:
            small.append(f"label {label} has {len(ids)} subjects")
            continue
        for pos, sid in enumerate(rng.permutation(ids)):
            buckets[pos % folds].append(int(sid))
    if small:
        raise DataError(
            "strata smaller than the fold count: " + "; ".join(small)
        )
    out = []
    for f in range(folds):
        test_ids = np.sort(np.asarray(buckets[f], dtype=np.int64))
        val_ids = np.sort(np.asarray(buckets[(f + 1) % folds], dtype=np.int64))
        train_ids = np.sort(
            np.concatenate(
                [np.asarray(buckets[j], dtype=np.int64)
                 for j in range(folds) if j != f and j != (f + 1) % folds]
            )
        )
        out.append(
            FoldSplit(
                train=dataset.select(train_ids),
                validation=dataset.select(val_ids),
                test=dataset.select(test_ids),
                train_ids=train_ids,
                validation_ids=val_ids,
                test_ids=test_ids,
            )
        )
    return out
