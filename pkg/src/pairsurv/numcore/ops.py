"""Primitive tensor operations with analytic reverse-mode derivatives.

Every operation validates its output for NaN/Inf and raises
:class:`~pairsurv.errors.NumericError`, so a forward pass either yields
finite values everywhere or fails loudly at the first offending op.
Shapes are restricted to what a dense feed-forward network needs; there is
no general broadcasting.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericError
from .tape import Tape, Tensor, accumulate

# Self-normalizing activation constants (the standard published values).
SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772
# Value that alpha-dropout writes into dropped entries: the activation's
# negative saturation point, so dropped units look like saturated ones.
DROP_SATURATION = -SELU_SCALE * SELU_ALPHA


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ValueError("operands were recorded on different tapes")
    return tape


def _check_finite(values: np.ndarray, op: str, label: str | None) -> None:
    # The sum propagates any NaN/Inf, which is far cheaper than isfinite()
    # over the whole array on the hot path.
    if not np.isfinite(np.sum(values)):
        where = f" in {label}" if label else ""
        raise NumericError(f"{op}: non-finite values{where}")


def _emit(tape, values, bwd, op: str, label: str | None = None) -> Tensor:
    _check_finite(values, op, label)
    if tape is None:
        return Tensor(values)
    return tape.record(values, bwd)


def matmul(a: Tensor, b: Tensor, label: str | None = None) -> Tensor:
    tape = _tape_of(a, b)
    av, bv = a.values, b.values
    out = av @ bv
    aid, bid = a.nid, b.nid

    def bwd(g, grads):
        accumulate(grads, aid, g @ bv.T)
        accumulate(grads, bid, av.T @ g)

    return _emit(tape, out, bwd, "matmul", label)


def add(a: Tensor, b: Tensor, label: str | None = None) -> Tensor:
    """Elementwise add; also supports adding a bias row to a 2-D tensor."""
    tape = _tape_of(a, b)
    av, bv = a.values, b.values
    aid, bid = a.nid, b.nid
    if av.shape == bv.shape:

        def bwd(g, grads):
            accumulate(grads, aid, g)
            accumulate(grads, bid, g)

    elif av.ndim == 2 and bv.shape == (av.shape[1],):

        def bwd(g, grads):
            accumulate(grads, aid, g)
            accumulate(grads, bid, g.sum(axis=0))

    else:
        raise ValueError(f"add: incompatible shapes {av.shape} and {bv.shape}")
    return _emit(tape, av + bv, bwd, "add", label)


def sub(a: Tensor, b: Tensor) -> Tensor:
    tape = _tape_of(a, b)
    av, bv = a.values, b.values
    if av.shape != bv.shape:
        raise ValueError(f"sub: incompatible shapes {av.shape} and {bv.shape}")
    aid, bid = a.nid, b.nid

    def bwd(g, grads):
        accumulate(grads, aid, g)
        accumulate(grads, bid, -g)

    return _emit(tape, av - bv, bwd, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    tape = _tape_of(a, b)
    av, bv = a.values, b.values
    if av.shape != bv.shape:
        raise ValueError(f"mul: incompatible shapes {av.shape} and {bv.shape}")
    aid, bid = a.nid, b.nid

    def bwd(g, grads):
        accumulate(grads, aid, g * bv)
        accumulate(grads, bid, g * av)

    return _emit(tape, av * bv, bwd, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    aid = a.nid

    def bwd(g, grads):
        accumulate(grads, aid, g * c)

    return _emit(a.tape, a.values * c, bwd, "scale")


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def selu(x: Tensor, label: str | None = None) -> Tensor:
    """Scaled exponential linear unit with the self-normalizing constants."""
    xv = x.values
    if not np.isfinite(np.sum(xv)):
        where = f" in {label}" if label else ""
        raise NumericError(f"selu: non-finite input{where}")
    neg_part = np.minimum(xv, 0.0)
    pos = xv > 0.0
    out = np.where(pos, SELU_SCALE * xv, SELU_SCALE * SELU_ALPHA * np.expm1(neg_part))
    xid = x.nid

    def bwd(g, grads):
        slope = np.where(pos, SELU_SCALE, SELU_SCALE * SELU_ALPHA * np.exp(neg_part))
        accumulate(grads, xid, g * slope)

    return _emit(x.tape, out, bwd, "selu", label)


def alpha_dropout(
    x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None
) -> Tensor:
    """Self-normalizing dropout: dropped entries are set to the activation's
    saturation value and the result is affinely corrected so a unit-variance,
    zero-mean input keeps those moments in expectation.

    In inference mode (or at rate 0) this is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    keep = 1.0 - rate
    mask = rng.random(x.shape) < keep
    gain = (keep + DROP_SATURATION**2 * keep * (1.0 - keep)) ** -0.5
    shift = -gain * (1.0 - keep) * DROP_SATURATION
    out = gain * np.where(mask, x.values, DROP_SATURATION) + shift
    xid = x.nid

    def bwd(g, grads):
        accumulate(grads, xid, g * (gain * mask))

    return _emit(x.tape, out, bwd, "alpha_dropout")


def scaled_sigmoid(a: float, x: Tensor) -> Tensor:
    """Elementwise 1 / (1 + exp(-a*x)), evaluated in the stable branch form
    so large |a*x| never exponentiates a positive argument."""
    a = float(a)
    if a <= 0.0:
        raise ConfigError(f"sigmoid scale must be positive, got {a}")
    z = a * x.values
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    xid = x.nid

    def bwd(g, grads):
        accumulate(grads, xid, g * (a * out * (1.0 - out)))

    return _emit(x.tape, out, bwd, "scaled_sigmoid")


def softmax_rows(x: Tensor, label: str | None = None) -> Tensor:
    """Row-wise softmax of a 2-D tensor."""
    xv = x.values
    if xv.ndim != 2:
        raise ValueError(f"softmax_rows expects a 2-D tensor, got {xv.shape}")
    shifted = xv - xv.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    xid = x.nid

    def bwd(g, grads):
        inner = (g * out).sum(axis=1, keepdims=True)
        accumulate(grads, xid, out * (g - inner))

    return _emit(x.tape, out, bwd, "softmax_rows", label)


def cumsum_last(x: Tensor) -> Tensor:
    """Prefix sums along the last axis."""
    out = np.cumsum(x.values, axis=-1)
    xid = x.nid

    def bwd(g, grads):
        rev = np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1)
        accumulate(grads, xid, rev)

    return _emit(x.tape, out, bwd, "cumsum_last")


def axis_sum(x: Tensor, axis: int) -> Tensor:
    """Sum over one axis (no keepdims)."""
    out = x.values.sum(axis=axis)
    xid = x.nid
    shape = x.values.shape

    def bwd(g, grads):
        accumulate(grads, xid, np.ascontiguousarray(np.broadcast_to(np.expand_dims(g, axis), shape)))

    return _emit(x.tape, out, bwd, "axis_sum")


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    out = x.values[start:stop].copy()
    xid = x.nid
    shape = x.values.shape

    def bwd(g, grads):
        buf = np.zeros(shape)
        buf[start:stop] = g
        accumulate(grads, xid, buf)

    return _emit(x.tape, out, bwd, "slice_rows")


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.values.ndim != 2:
        raise ValueError(f"slice_cols expects a 2-D tensor, got {x.values.shape}")
    out = x.values[:, start:stop].copy()
    xid = x.nid
    shape = x.values.shape

    def bwd(g, grads):
        buf = np.zeros(shape)
        buf[:, start:stop] = g
        accumulate(grads, xid, buf)

    return _emit(x.tape, out, bwd, "slice_cols")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.values.reshape(shape).copy()
    xid = x.nid
    orig = x.values.shape

    def bwd(g, grads):
        accumulate(grads, xid, g.reshape(orig))

    return _emit(x.tape, out, bwd, "reshape")


def take_flat(x: Tensor, idx) -> Tensor:
    """Gather entries of the flattened tensor at integer positions ``idx``."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.size):
        raise ValueError("take_flat: index out of range")
    flat = x.values.reshape(-1)
    out = flat[idx]
    xid = x.nid
    size, shape = x.size, x.values.shape

    def bwd(g, grads):
        buf = np.zeros(size)
        np.add.at(buf, idx, g)
        accumulate(grads, xid, buf.reshape(shape))

    return _emit(x.tape, out, bwd, "take_flat")


def square(x: Tensor) -> Tensor:
    xv = x.values
    xid = x.nid

    def bwd(g, grads):
        accumulate(grads, xid, g * (2.0 * xv))

    return _emit(x.tape, xv * xv, bwd, "square")


def total_sum(x: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = np.asarray(np.sum(x.values))
    xid = x.nid
    shape = x.values.shape

    def bwd(g, grads):
        accumulate(grads, xid, np.full(shape, float(g)))

    return _emit(x.tape, out, bwd, "total_sum")


def weighted_sum(x: Tensor, weights) -> Tensor:
    """Scalar sum(x * weights) with constant weights."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.values.shape:
        raise ValueError(
            f"weighted_sum: incompatible shapes {x.values.shape} and {w.shape}"
        )
    out = np.asarray(np.sum(x.values * w))
    xid = x.nid

    def bwd(g, grads):
        accumulate(grads, xid, float(g) * w)

    return _emit(x.tape, out, bwd, "weighted_sum")
