"""Comparable-pair construction, inverse-frequency weighting, and sampling.

For cause m, the comparable set holds every ordered pair (left, right)
where the left subject experienced cause m and the right subject's time
index is strictly later on the grid. Right members may be censored or have
any event label.

Pairs with the same cause and left time index share the same right-member
set (everyone strictly later), so the index stores each (cause, time)
group once instead of materializing the cross product; sampling and
weighting treat the groups as the flattened pair list they stand for.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class ComparablePair:
    """Ordered subject-id pair for one cause, with its sampling weight."""

    left: int
    right: int
    cause: int
    weight: float = 1.0


def build_comparable_set(dataset: Dataset, cause: int) -> list[ComparablePair]:
    """Materialize the comparable set for one cause.

    Output is sorted by (left time index, left id, right id). Intended for
    small datasets and tests; training uses the grouped :class:`PairIndex`.
    """
    if cause == 0:
        raise ConfigError("censoring label 0 is not a cause")
    if not 1 <= cause <= dataset.num_causes:
        raise ConfigError(
            f"cause {cause} outside 1..{dataset.num_causes}"
        )
    t = dataset.time_index
    lefts = np.flatnonzero(dataset.event == cause)
    lefts = lefts[np.lexsort((lefts, t[lefts]))]
    out = []
    for left in lefts:
        for right in np.flatnonzero(t > t[left]):
            out.append(ComparablePair(int(left), int(right), cause))
    return out


@dataclass(frozen=True)
class PairIndex:
    """Comparable sets of all causes, grouped by (cause, left time index).

    ``ids_by_time`` holds every subject id ordered by (time index, id);
    the right members of group c are the suffix starting at
    ``rights_start[c]``. Left members are stored flattened in
    ``lefts_flat`` with per-group offsets.
    """

    num_causes: int
    cell_cause: np.ndarray
    cell_time: np.ndarray
    lefts_flat: np.ndarray
    left_offset: np.ndarray
    left_count: np.ndarray
    ids_by_time: np.ndarray
    rights_start: np.ndarray
    right_count: np.ndarray
    pair_counts: np.ndarray
    weights: np.ndarray | None = None

    @property
    def total_pairs(self) -> int:
        return int(self.pair_counts.sum())

    @property
    def num_cells(self) -> int:
        return len(self.cell_cause)

    def num_pairs(self, cause: int) -> int:
        return int(self.pair_counts[self.cell_cause == cause].sum())

    def pair_count(self, cause: int, time_index: int) -> int:
        hit = (self.cell_cause == cause) & (self.cell_time == time_index)
        return int(self.pair_counts[hit].sum())

    def cell_weight(self, cause: int, time_index: int) -> float:
        if self.weights is None:
            return 1.0
        hit = np.flatnonzero((self.cell_cause == cause) & (self.cell_time == time_index))
        if len(hit) == 0:
            raise KeyError(f"no pairs for cause {cause} at time index {time_index}")
        return float(self.weights[hit[0]])

    def pairs(self, cause: int) -> list[ComparablePair]:
        """Materialize one cause's pairs in (left time, left id, right id) order."""
        out = []
        for c in np.flatnonzero(self.cell_cause == cause):
            w = 1.0 if self.weights is None else float(self.weights[c])
            rights = np.sort(self.ids_by_time[self.rights_start[c]:])
            lo = self.left_offset[c]
            for left in self.lefts_flat[lo:lo + self.left_count[c]]:
                for right in rights:
                    out.append(ComparablePair(int(left), int(right), cause, w))
        return out


def build_pair_index(dataset: Dataset) -> PairIndex:
    """Group the comparable sets of every cause by left time index."""
    t = dataset.time_index
    n = len(dataset)
    order = np.argsort(t, kind="stable").astype(np.int64)
    t_sorted = t[order]
    cell_cause, cell_time = [], []
    lefts_parts, left_count, rights_start = [], [], []
    for cause in range(1, dataset.num_causes + 1):
        cause_ids = np.flatnonzero(dataset.event == cause)
        for k in np.unique(t[cause_ids]):
            start = int(np.searchsorted(t_sorted, k, side="right"))
            if start >= n:
                continue  # no subject strictly later: no pairs from this group
            lefts = np.sort(cause_ids[t[cause_ids] == k])
            cell_cause.append(cause)
            cell_time.append(int(k))
            lefts_parts.append(lefts)
            left_count.append(len(lefts))
            rights_start.append(start)
    left_count = np.asarray(left_count, dtype=np.int64)
    rights_start = np.asarray(rights_start, dtype=np.int64)
    right_count = n - rights_start
    left_offset = np.concatenate(([0], np.cumsum(left_count)[:-1])) if len(left_count) else np.zeros(0, dtype=np.int64)
    return PairIndex(
        num_causes=dataset.num_causes,
        cell_cause=np.asarray(cell_cause, dtype=np.int64),
        cell_time=np.asarray(cell_time, dtype=np.int64),
        lefts_flat=np.concatenate(lefts_parts) if lefts_parts else np.zeros(0, dtype=np.int64),
        left_offset=left_offset.astype(np.int64),
        left_count=left_count,
        ids_by_time=order,
        rights_start=rights_start,
        right_count=right_count.astype(np.int64),
        pair_counts=left_count * right_count,
    )


def ipw_weights(index: PairIndex) -> PairIndex:
    """Attach inverse-frequency weights per (cause, left time index) group.

    A group holding a fraction f of all pairs gets weight 1/f, so every
    occupied group carries the same total weight regardless of how many
    pairs fall into it.
    """
    total = index.total_pairs
    if total == 0:
        return replace(index, weights=np.zeros(0))
    freq = index.pair_counts / total
    return replace(index, weights=1.0 / freq)


@dataclass(frozen=True)
class PairBatch:
    """Columnar batch of sampled comparable pairs."""

    left: np.ndarray
    right: np.ndarray
    cause: np.ndarray
    time_index: np.ndarray  # left member's event time index
    weight: np.ndarray

    def __len__(self) -> int:
        return len(self.left)

    def __getitem__(self, i: int) -> ComparablePair:
        return ComparablePair(
            int(self.left[i]), int(self.right[i]), int(self.cause[i]),
            float(self.weight[i]),
        )


def sample_batch(index: PairIndex, batch_size: int, rng: np.random.Generator) -> PairBatch:
    """Draw ``batch_size`` pairs i.i.d. uniformly (with replacement) over the
    pooled pair lists of all causes."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    total = index.total_pairs
    if total == 0:
        raise DataError("no comparable pairs to sample from")
    cum = np.cumsum(index.pair_counts)
    u = rng.integers(0, total, size=batch_size)
    cell = np.searchsorted(cum, u, side="right")
    within = u - (cum[cell] - index.pair_counts[cell])
    nr = index.right_count[cell]
    left = index.lefts_flat[index.left_offset[cell] + within // nr]
    right = index.ids_by_time[index.rights_start[cell] + within % nr]
    if index.weights is None:
        w = np.ones(batch_size)
    else:
        w = index.weights[cell]
    return PairBatch(
        left=left.astype(np.int64),
        right=right.astype(np.int64),
        cause=index.cell_cause[cell],
        time_index=index.cell_time[cell],
        weight=w.astype(np.float64),
    )
