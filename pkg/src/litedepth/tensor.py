"""Dense float64 tensors with reverse-mode automatic differentiation.

Every value flowing through the library is a :class:`Tensor`: a contiguous
double-precision numpy array plus optional links into the computation graph.
Gradients are computed by a single reverse sweep over the recorded graph in
decreasing creation order (creation ids are monotone, so they are already a
topological order).
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import erf as _erf


class DimensionError(ValueError):
    """Shape or axis-compatibility violation."""


class ArgumentError(ValueError):
    """Invalid argument value (out of documented range)."""


class ContractError(RuntimeError):
    """A documented precondition was violated at call time."""


class NumericError(ArithmeticError):
    """Non-finite values encountered where finite ones are required."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording inside its scope."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """N-dimensional float64 array with optional gradient and graph linkage.

    Image features use batch x channels x height x width layout. A tensor
    with ``requires_grad=False`` never receives a ``grad`` buffer.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_id")
    _ids = itertools.count()

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple = ()
        self._backward = None
        self._id = next(Tensor._ids)

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _bad_item(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        """Same data, severed from the graph."""
        return Tensor(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    # -- graph construction --------------------------------------------------

    @staticmethod
    def _make(data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self):
        """Reverse-mode sweep from a scalar loss.

        Every reachable ``requires_grad`` tensor receives d(loss)/d(tensor)
        added into its ``grad`` buffer; repeated calls accumulate.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar loss, got shape {self.data.shape}"
            )
        # Collect the reachable subgraph; creation ids increase from leaves
        # to outputs, so iterating by decreasing id visits each node once
        # with its output gradient complete.
        nodes = {}
        stack = [self]
        while stack:
            t = stack.pop()
            if t._id in nodes:
                continue
            nodes[t._id] = t
            stack.extend(t._parents)
        flows = {self._id: np.ones_like(self.data)}
        for tid in sorted(nodes, reverse=True):
            t = nodes[tid]
            g = flows.pop(tid, None)
            if g is None:
                continue
            if t.requires_grad:
                # closures never mutate their output gradient, so aliasing is safe
                t.grad = g if t.grad is None else t.grad + g
            if t._backward is None:
                continue
            for p, gp in zip(t._parents, t._backward(g)):
                if gp is None or not p.requires_grad:
                    continue
                if p._id in flows:
                    flows[p._id] = flows[p._id] + gp
                else:
                    flows[p._id] = gp

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -_np(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # method-style aliases
    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return tmax(self, axis, keepdims)

    def min(self, axis=None, keepdims=False):
        return tmin(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def transpose(self, *axes):
        return transpose(self, *axes)


def _bad_item(t):
    raise ContractError(f"item() requires a single-element tensor, got {t.shape}")


def _np(x):
    return np.asarray(x, dtype=np.float64)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise binary -------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor._make(out_data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def back(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Tensor._make(out_data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def back(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return Tensor._make(out_data, (a, b), back)


def maximum(a, b) -> Tensor:
    """Elementwise max; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data >= b.data

    def back(g):
        return (
            _unbroadcast(g * pick_a, a.data.shape),
            _unbroadcast(g * ~pick_a, b.data.shape),
        )

    return Tensor._make(np.where(pick_a, a.data, b.data), (a, b), back)


def minimum(a, b) -> Tensor:
    """Elementwise min; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data

    def back(g):
        return (
            _unbroadcast(g * pick_a, a.data.shape),
            _unbroadcast(g * ~pick_a, b.data.shape),
        )

    return Tensor._make(np.where(pick_a, a.data, b.data), (a, b), back)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = np.matmul(a.data, b.data)

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return Tensor._make(out_data, (a, b), back)


# -- elementwise unary --------------------------------------------------------


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    out_data = a.data**p

    def back(g):
        return (g * p * a.data ** (p - 1.0),)

    return Tensor._make(out_data, (a,), back)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def back(g):
        return (g * out_data,)

    return Tensor._make(out_data, (a,), back)


def log(a) -> Tensor:
    a = as_tensor(a)

    def back(g):
        return (g / a.data,)

    return Tensor._make(np.log(a.data), (a,), back)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def back(g):
        return (g * 0.5 / out_data,)

    return Tensor._make(out_data, (a,), back)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)

    def back(g):
        return (g * sign,)

    return Tensor._make(np.abs(a.data), (a,), back)


def sin(a) -> Tensor:
    a = as_tensor(a)

    def back(g):
        return (g * np.cos(a.data),)

    return Tensor._make(np.sin(a.data), (a,), back)


def cos(a) -> Tensor:
    a = as_tensor(a)

    def back(g):
        return (g * -np.sin(a.data),)

    return Tensor._make(np.cos(a.data), (a,), back)


def clamp(a, lo=None, hi=None) -> Tensor:
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi

    def back(g):
        return (g * inside,)

    return Tensor._make(out_data, (a,), back)


def where(cond, a, b) -> Tensor:
    """Differentiable select; ``cond`` is a plain boolean array, not a tensor."""
    cond = np.asarray(cond, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        return (
            _unbroadcast(g * cond, a.data.shape),
            _unbroadcast(g * ~cond, b.data.shape),
        )

    return Tensor._make(np.where(cond, a.data, b.data), (a, b), back)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def back(g):
        return (g * out_data * (1.0 - out_data),)

    return Tensor._make(out_data, (a,), back)


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a) -> Tensor:
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + _erf(x * _INV_SQRT2))

    def back(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
        return (g * (cdf + x * pdf),)

    return Tensor._make(x * cdf, (a,), back)


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    pos = a.data >= 0
    scale = np.where(pos, 1.0, slope)

    def back(g):
        return (g * scale,)

    return Tensor._make(a.data * scale, (a,), back)


# -- reductions ----------------------------------------------------------------


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return Tensor._make(out_data, (a,), back)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    denom = a.data.size if axis is None else _axis_size(a.data.shape, axis)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g / denom, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / denom, a.data.shape).copy(),)

    return Tensor._make(out_data, (a,), back)


def _axis_size(shape, axis):
    if isinstance(axis, int):
        return shape[axis]
    return int(np.prod([shape[ax] for ax in axis]))


def _extreme(a, axis, keepdims, op, argop):
    a = as_tensor(a)
    if axis is None:
        out_data = op(a.data)
        flat_idx = argop(a.data)  # first extremum in row-major order

        def back(g):
            gx = np.zeros_like(a.data)
            gx.reshape(-1)[flat_idx] = g
            return (gx,)

        return Tensor._make(np.asarray(out_data), (a,), back)

    out_data = op(a.data, axis=axis, keepdims=keepdims)
    idx = argop(a.data, axis=axis)

    def back(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        gx = np.zeros_like(a.data)
        np.put_along_axis(gx, np.expand_dims(idx, axis), gg, axis)
        return (gx,)

    return Tensor._make(out_data, (a,), back)


def tmax(a, axis=None, keepdims=False) -> Tensor:
    """Max reduction; ties route the gradient to the first maximal element."""
    return _extreme(a, axis, keepdims, np.max, np.argmax)


def tmin(a, axis=None, keepdims=False) -> Tensor:
    return _extreme(a, axis, keepdims, np.min, np.argmin)


# -- shape manipulation ----------------------------------------------------------


def reshape(a, *shape) -> Tensor:
    a = as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])

    def back(g):
        return (g.reshape(a.data.shape),)

    return Tensor._make(a.data.reshape(shape), (a,), back)


def transpose(a, *axes) -> Tensor:
    a = as_tensor(a)
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    if not axes:
        axes = tuple(reversed(range(a.data.ndim)))
    inv = tuple(np.argsort(axes))

    def back(g):
        return (g.transpose(inv),)

    return Tensor._make(a.data.transpose(axes), (a,), back)


def take(a, idx) -> Tensor:
    """Basic (slice/integer) indexing with gradient scatter."""
    a = as_tensor(a)
    out_data = a.data[idx]

    def back(g):
        gx = np.zeros_like(a.data)
        gx[idx] += g
        return (gx,)

    return Tensor._make(out_data, (a,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ArgumentError("concat requires at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        grads = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return Tensor._make(out_data, tuple(tensors), back)


def stack(tensors, axis: int = 0) -> Tensor:
    return concat([reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis)


def pad_zero(a, pad) -> Tensor:
    """Zero padding; ``pad`` is a per-axis sequence of (before, after) pairs."""
    a = as_tensor(a)
    pad = tuple(tuple(p) for p in pad)
    out_data = np.pad(a.data, pad)
    sl = tuple(slice(b, b + n) for (b, _), n in zip(pad, a.data.shape))

    def back(g):
        return (g[sl],)

    return Tensor._make(out_data, (a,), back)


def scatter_add(shape, flat_index: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Dense scatter-add via bincount (much faster than np.add.at)."""
    total = int(np.prod(shape))
    flat_index, values = np.broadcast_arrays(flat_index, values)
    out = np.bincount(flat_index.reshape(-1), weights=values.reshape(-1),
                      minlength=total)
    return out.reshape(shape)


def pad_reflect2d(a, pad: int) -> Tensor:
    """Reflect-pad the last two axes by ``pad`` on every side."""
    a = as_tensor(a)
    if pad == 0:
        return a
    h, w = a.data.shape[-2:]
    if pad >= h or pad >= w:
        raise DimensionError(
            f"reflect pad {pad} too large for spatial extent {h}x{w}"
        )
    widths = [(0, 0)] * (a.data.ndim - 2) + [(pad, pad), (pad, pad)]
    out_data = np.pad(a.data, widths, mode="reflect")
    # flattened source index of each padded cell, for the gradient scatter
    ridx = np.pad(np.arange(h), (pad, pad), mode="reflect")
    cidx = np.pad(np.arange(w), (pad, pad), mode="reflect")
    lead = int(np.prod(a.data.shape[:-2]))
    src = (ridx[:, None] * w + cidx[None, :]).reshape(-1)
    full_idx = (np.arange(lead)[:, None] * (h * w) + src[None, :]).reshape(out_data.shape)

    def back(g):
        return (scatter_add(a.data.shape, full_idx, g),)

    return Tensor._make(out_data, (a,), back)
