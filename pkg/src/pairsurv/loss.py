"""Pairwise training objective over a batch of comparable pairs.

Three terms, each a weighted sum over the sampled pairs:

- discrimination: a sharp sigmoid of the risk gap between the pair's left
  and right member, both evaluated for the pair's cause at the left
  member's event time. Rewards concordant ordering.
- accuracy: a sharp sigmoid of (left member's own-cause risk minus the sum
  of its other-cause risks) at its event time. Rewards predicting the
  cause that actually occurred.
- interpolation: a quadratic penalty on the right member's own-cause risk
  at every grid point strictly before the left member's event time, where
  the right member is known to be event-free.

The combined objective is minimized, so the two reward terms enter with a
negative sign and the penalty with a positive one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .numcore import Tensor, ops
from .pairs import PairBatch


@dataclass(frozen=True)
class LossConfig:
    disc_scale: float = 500.0  # sigmoid sharpness of the discrimination term
    acc_scale: float = 500.0  # sigmoid sharpness of the accuracy term
    interp_weight: float = 0.01  # coefficient of the quadratic penalty

    def __post_init__(self):
        if self.disc_scale <= 0 or self.acc_scale <= 0:
            raise ConfigError("sigmoid scales must be positive")
        if self.interp_weight < 0:
            raise ConfigError("interpolation weight must be >= 0")


@dataclass(frozen=True)
class BatchCifs:
    """Incidence estimates for the two sides of a pair batch, row-aligned
    with the batch: entry b of either side belongs to pair b."""

    left: Tensor  # (B, M, K)
    right: Tensor  # (B, M, K)


@dataclass(frozen=True)
class BatchLoss:
    discrimination: Tensor
    accuracy: Tensor
    interpolation: Tensor
    total: Tensor

    def components(self) -> dict[str, float]:
        return {
            "discrimination": self.discrimination.item(),
            "accuracy": self.accuracy.item(),
            "interpolation": self.interpolation.item(),
            "total": self.total.item(),
        }


def _check(batch: PairBatch, cifs: BatchCifs) -> tuple[int, int, int]:
    if cifs.left is None or cifs.right is None:
        raise ValueError("batch incidence estimates missing")
    b, m, k = cifs.left.shape
    if cifs.right.shape != (b, m, k) or b != len(batch):
        raise ValueError(
            f"incidence shapes {cifs.left.shape}/{cifs.right.shape} do not "
            f"match a batch of {len(batch)} pairs"
        )
    if (batch.cause < 1).any() or (batch.cause > m).any():
        raise ValueError("pair causes outside 1..M (censored left member?)")
    if (batch.time_index < 0).any() or (batch.time_index >= k).any():
        raise ValueError("pair time index outside the grid")
    return b, m, k


def _own_risk_indices(batch: PairBatch, m: int, k: int) -> np.ndarray:
    # flat position of entry (b, cause-1, time_index) in a (B, M, K) block
    rows = np.arange(len(batch), dtype=np.int64)
    return rows * (m * k) + (batch.cause - 1) * k + batch.time_index


def discrimination_term(batch: PairBatch, cifs: BatchCifs, config: LossConfig) -> Tensor:
    """Weighted sigmoid count of pairs ranked concordantly."""
    _, m, k = _check(batch, cifs)
    idx = _own_risk_indices(batch, m, k)
    left = ops.take_flat(cifs.left, idx)
    right = ops.take_flat(cifs.right, idx)
    s = ops.scaled_sigmoid(config.disc_scale, ops.sub(left, right))
    return ops.weighted_sum(s, batch.weight)


def accuracy_term(batch: PairBatch, cifs: BatchCifs, config: LossConfig) -> Tensor:
    """Weighted sigmoid of the left member's own-cause risk margin.

    Only the left member's risks at its own event time appear; with a
    single cause the subtracted sum is empty and the term is monotone in
    the subject's own risk.
    """
    _, m, k = _check(batch, cifs)
    idx = _own_risk_indices(batch, m, k)
    own = ops.take_flat(cifs.left, idx)
    total_by_time = ops.axis_sum(cifs.left, 1)  # (B, K) risk mass over causes
    rows = np.arange(len(batch), dtype=np.int64)
    total = ops.take_flat(total_by_time, rows * k + batch.time_index)
    # own - (total - own)
    margin = ops.sub(ops.scale(own, 2.0), total)
    s = ops.scaled_sigmoid(config.acc_scale, margin)
    return ops.weighted_sum(s, batch.weight)


def interpolation_term(batch: PairBatch, cifs: BatchCifs, config: LossConfig) -> Tensor:
    """Quadratic penalty on right members' own-cause risk before the left
    member's event time. Pairs whose left time is the first grid point have
    no earlier grid point and contribute zero."""
    _, m, k = _check(batch, cifs)
    sq = ops.cumsum_last(ops.square(cifs.right))
    rows = np.arange(len(batch), dtype=np.int64)
    k_prev = np.maximum(batch.time_index - 1, 0)
    idx = rows * (m * k) + (batch.cause - 1) * k + k_prev
    acc = ops.take_flat(sq, idx)
    coeff = config.interp_weight * batch.weight * (batch.time_index > 0)
    return ops.weighted_sum(acc, coeff)


def total_loss(batch: PairBatch, cifs: BatchCifs, config: LossConfig) -> BatchLoss:
    """Combine the three terms for minimization: -disc - acc + interp."""
    disc = discrimination_term(batch, cifs, config)
    acc = accuracy_term(batch, cifs, config)
    interp = interpolation_term(batch, cifs, config)
    total = ops.sub(ops.sub(interp, disc), acc)
    return BatchLoss(
        discrimination=disc, accuracy=acc, interpolation=interp, total=total
    )
