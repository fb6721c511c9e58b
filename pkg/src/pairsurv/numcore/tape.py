"""Dense float64 tensors and a reverse-mode differentiation tape.

The tape stores one record per primitive operation in execution order,
which is a topological order of the computation graph. A single reverse
sweep over the records therefore visits every node after all of its
consumers and accumulates exact gradients.
"""
from __future__ import annotations

from typing import Callable

import numpy as np


class Tensor:
    """A contiguous array of 64-bit floats, optionally tracked on a tape.

    Tensors are immutable once created: operations return new tensors and
    never write back into their inputs. A tensor with ``tape is None`` is a
    constant and receives no gradient.
    """

    __slots__ = ("values", "tape", "nid")

    def __init__(self, values, tape: "Tape | None" = None, nid: int = -1):
        arr = np.asarray(values, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.values = arr
        self.tape = tape
        self.nid = nid

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def __repr__(self) -> str:
        kind = "constant" if self.tape is None else f"node {self.nid}"
        return f"Tensor(shape={self.values.shape}, {kind})"


# A backward callback receives the gradient w.r.t. the op's output and the
# accumulator map, and adds contributions for the op's inputs.
BackwardFn = Callable[[np.ndarray, dict], None]


def accumulate(grads: dict, nid: int, contribution: np.ndarray) -> None:
    """Add a gradient contribution for node ``nid``; constants are dropped."""
    if nid < 0:
        return
    current = grads.get(nid)
    grads[nid] = contribution if current is None else current + contribution


class Tape:
    """Execution-ordered record of the primitive operations of one evaluation.

    A tape has a single writer: the thread running the forward pass. Leaves
    (parameters, differentiable inputs) are created with :meth:`leaf`;
    primitive ops append records via :meth:`record`.
    """

    __slots__ = ("_records", "_next_id")

    def __init__(self) -> None:
        self._records: list[tuple[int, BackwardFn]] = []
        self._next_id = 0

    def _new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def leaf(self, values) -> Tensor:
        """Register a differentiable leaf (no backward record)."""
        return Tensor(values, self, self._new_id())

    def record(self, values: np.ndarray, bwd: BackwardFn) -> Tensor:
        out = Tensor(values, self, self._new_id())
        self._records.append((out.nid, bwd))
        return out

    def __len__(self) -> int:
        return len(self._records)


class Gradients:
    """Per-node gradient accumulators produced by :func:`backward`."""

    __slots__ = ("_by_node", "_tape")

    def __init__(self, by_node: dict, tape: Tape):
        self._by_node = by_node
        self._tape = tape

    def wrt(self, t: Tensor) -> np.ndarray:
        """Gradient of the root w.r.t. ``t``; exact zeros if ``t`` was unused."""
        if t.tape is not self._tape or t.nid < 0:
            raise ValueError("tensor is not tracked on this tape")
        g = self._by_node.get(t.nid)
        return np.zeros(t.shape) if g is None else g


def backward(tape: Tape, root: Tensor) -> Gradients:
    """Run the reverse sweep from a scalar root and return the gradients.

    Every gradient accumulator starts at zero (represented by absence) and
    intermediate accumulators are released as soon as their record has been
    replayed, so only leaf gradients survive the sweep.
    """
    if root.tape is not tape:
        raise ValueError("root was not recorded on this tape")
    if root.values.shape != ():
        raise ValueError(
            f"backward root must be a scalar, got shape {root.values.shape}"
        )
    grads: dict = {root.nid: np.ones(())}
    for nid, bwd in reversed(tape._records):
        g = grads.pop(nid, None)
        if g is not None:
            bwd(g, grads)
    return Gradients(grads, tape)
