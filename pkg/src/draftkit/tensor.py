"""Dense float64 tensors with reverse-mode differentiation.

A ``Tensor`` wraps a numpy array plus an optional gradient and a record of
how it was produced.  Calling :meth:`Tensor.backward` on a scalar walks the
tape in reverse topological order and accumulates gradients into every
tensor that participated.  The traversal order is fixed by construction
order, so gradients are bit-identical across runs given identical inputs.

All arithmetic is double precision; single precision appears only in the
persisted archive format (see :mod:`draftkit.store`).
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import DegenerateInputError, InvalidArgumentError, NumericError

Array = np.ndarray

# Tape recording is toggled per thread so concurrent inference can run
# under no_grad without disturbing a training thread.
_STATE = threading.local()


def _recording() -> bool:
    return getattr(_STATE, "grad_enabled", True)

# Norms below this are treated as zero vectors for cosine purposes.
_NORM_FLOOR = 1e-300

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the context (inference fast path)."""
    previous = _recording()
    _STATE.grad_enabled = False
    try:
        yield
    finally:
        _STATE.grad_enabled = previous


class Tensor:
    """A float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __float__(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- autodiff ---------------------------------------------------------

    def backward(self) -> None:
        """Populate ``grad`` on every tensor this scalar depends on."""
        if self.data.size != 1:
            raise InvalidArgumentError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __pow__(self, exponent):
        return power(self, exponent)

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise InvalidArgumentError("T is defined for 2-D tensors only")
        return transpose(self, (1, 0))


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: Array, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if _recording() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient back down to ``shape`` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise InvalidArgumentError(f"add: shapes {a.shape} and {b.shape}: {exc}")

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise InvalidArgumentError(f"sub: shapes {a.shape} and {b.shape}: {exc}")

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _node(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise InvalidArgumentError(f"mul: shapes {a.shape} and {b.shape}: {exc}")

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data / b.data
    except ValueError as exc:
        raise InvalidArgumentError(f"div: shapes {a.shape} and {b.shape}: {exc}")

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g / b.data, a.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(data, (a, b), backward)


def power(a: Tensor, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for a constant real exponent.

    For fractional exponents the base must be nonnegative; the derivative at
    an exactly-zero base is taken as 0 (subgradient choice).
    """
    e = float(exponent)
    if e != int(e) and np.any(a.data < 0):
        raise InvalidArgumentError("power: negative base with fractional exponent")
    data = a.data**e

    def backward(g: Array) -> None:
        base = a.data
        with np.errstate(divide="ignore", invalid="ignore"):
            local = e * base ** (e - 1.0)
        local = np.where(np.isfinite(local), local, 0.0)
        _accumulate(a, g * local)

    return _node(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        data = np.exp(a.data)

    def backward(g: Array) -> None:
        _accumulate(a, g * data)

    return _node(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise InvalidArgumentError("log: nonpositive input")
    data = np.log(a.data)

    def backward(g: Array) -> None:
        _accumulate(a, g / a.data)

    return _node(data, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0):
        raise InvalidArgumentError("sqrt: negative input")
    data = np.sqrt(a.data)

    def backward(g: Array) -> None:
        _accumulate(a, g * 0.5 / np.maximum(data, _NORM_FLOOR))

    return _node(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(g: Array) -> None:
        _accumulate(a, g * (1.0 - data * data))

    return _node(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def backward(g: Array) -> None:
        _accumulate(a, g * (a.data > 0.0))

    return _node(data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-error linear unit."""
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    data = a.data * cdf

    def backward(g: Array) -> None:
        pdf = _INV_SQRT2PI * np.exp(-0.5 * a.data * a.data)
        _accumulate(a, g * (cdf + a.data * pdf))

    return _node(data, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp into [lo, hi]; gradient passes only strictly inside the band."""
    data = np.clip(a.data, lo, hi)

    def backward(g: Array) -> None:
        _accumulate(a, g * ((a.data > lo) & (a.data < hi)))

    return _node(data, (a,), backward)


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2-D x 2-D, stacked N-D x N-D, or N-D x 2-D."""
    if a.ndim < 2 or b.ndim < 2:
        raise InvalidArgumentError("matmul requires >= 2-D operands")
    if a.shape[-1] != b.shape[-2]:
        raise InvalidArgumentError(
            f"matmul: inner dimensions differ, {a.shape} @ {b.shape}"
        )
    if not (a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2]) and b.ndim != 2:
        raise InvalidArgumentError(
            f"matmul: unsupported batch shapes {a.shape} @ {b.shape}"
        )
    data = a.data @ b.data

    def backward(g: Array) -> None:
        if b.ndim == 2 and a.ndim != 2:
            _accumulate(a, g @ b.data.T)
            _accumulate(
                b, a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            )
        else:
            _accumulate(a, g @ np.swapaxes(b.data, -1, -2))
            _accumulate(b, np.swapaxes(a.data, -1, -2) @ g)

    return _node(data, (a, b), backward)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    data = np.transpose(a.data, axes)
    inverse = tuple(np.argsort(axes))

    def backward(g: Array) -> None:
        _accumulate(a, np.transpose(g, inverse))

    return _node(data, (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g: Array) -> None:
        _accumulate(a, g.reshape(a.shape))

    return _node(data, (a,), backward)


# -- reductions --------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g: Array) -> None:
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())

    return _node(data, (a,), backward)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / count))


# -- softmax family ----------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Probability vector over ``axis``; computed with max subtraction."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g: Array) -> None:
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(a, data * (g - inner))

    return _node(data, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    soft = np.exp(data)

    def backward(g: Array) -> None:
        _accumulate(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _node(data, (a,), backward)


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    data_keep = m + np.log(s)
    soft = e / s
    data = data_keep if keepdims else np.squeeze(data_keep, axis=axis)

    def backward(g: Array) -> None:
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, soft * g)

    return _node(data, (a,), backward)


# -- normalization -----------------------------------------------------------


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise InvalidArgumentError(
            f"layer_norm: gain/bias must have shape {x.shape[-1:]}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    data = xhat * gain.data + bias.data

    def backward(g: Array) -> None:
        gy = g * gain.data
        gx = (
            inv_std
            * (
                gy
                - gy.mean(axis=-1, keepdims=True)
                - xhat * (gy * xhat).mean(axis=-1, keepdims=True)
            )
        )
        _accumulate(x, gx)
        reduce_axes = tuple(range(g.ndim - 1))
        _accumulate(gain, (g * xhat).sum(axis=reduce_axes))
        _accumulate(bias, g.sum(axis=reduce_axes))

    return _node(data, (x, gain, bias), backward)


# -- gather / slice ----------------------------------------------------------


def take_rows(t: Tensor, ids: Array) -> Tensor:
    """Row gather ``t[ids]`` for an integer index array of any shape."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= t.shape[0]):
        raise InvalidArgumentError(
            f"take_rows: index out of range for {t.shape[0]} rows"
        )
    data = t.data[ids]

    def backward(g: Array) -> None:
        full = np.zeros_like(t.data)
        np.add.at(full, ids, g)
        _accumulate(t, full)

    return _node(data, (t,), backward)


def take_last_axis(t: Tensor, idx: Array) -> Tensor:
    """Pick one entry along the last axis: ``out[...] = t[..., idx[...]]``."""
    idx = np.asarray(idx)
    if idx.shape != t.shape[:-1]:
        raise InvalidArgumentError(
            f"take_last_axis: index shape {idx.shape} must equal {t.shape[:-1]}"
        )
    data = np.take_along_axis(t.data, idx[..., None], axis=-1)[..., 0]

    def backward(g: Array) -> None:
        full = np.zeros_like(t.data)
        flat = full.reshape(-1, t.shape[-1])
        rows = np.arange(flat.shape[0])
        np.add.at(flat, (rows, idx.reshape(-1)), g.reshape(-1))
        _accumulate(t, full)

    return _node(data, (t,), backward)


def first_rows(t: Tensor, n: int) -> Tensor:
    """Leading-row slice ``t[:n]``."""
    if n < 0 or n > t.shape[0]:
        raise InvalidArgumentError(f"first_rows: n={n} outside [0, {t.shape[0]}]")
    data = t.data[:n]

    def backward(g: Array) -> None:
        full = np.zeros_like(t.data)
        full[:n] = g
        _accumulate(t, full)

    return _node(data, (t,), backward)


# -- similarity --------------------------------------------------------------


def cosine(u: Tensor, v: Tensor) -> Tensor:
    """Cosine similarity of two 1-D vectors, clamped into [-1, 1]."""
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise InvalidArgumentError(
            f"cosine requires equal-length vectors, got {u.shape} and {v.shape}"
        )
    nu = float(np.linalg.norm(u.data))
    nv = float(np.linalg.norm(v.data))
    if nu < _NORM_FLOOR or nv < _NORM_FLOOR:
        raise DegenerateInputError("cosine: zero-norm vector")
    un = mul(u, Tensor(1.0 / nu))
    vn = mul(v, Tensor(1.0 / nv))
    return clip(tsum(mul(un, vn)), -1.0, 1.0)


def normalize_rows(h: Tensor) -> Tensor:
    """Scale each row of a 2-D tensor to unit Euclidean norm."""
    norms = np.linalg.norm(h.data, axis=-1)
    if np.any(norms < _NORM_FLOOR):
        raise DegenerateInputError("normalize_rows: zero-norm row")
    sq = tsum(mul(h, h), axis=-1, keepdims=True)
    return div(h, sqrt(sq))


def pairwise_cosine(h: Tensor) -> Tensor:
    """All-pairs cosine matrix of the rows of ``h``, clamped into [-1, 1]."""
    hn = normalize_rows(h)
    return clip(matmul(hn, transpose(hn, (1, 0))), -1.0, 1.0)


def check_finite(t: Tensor, what: str = "value") -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"non-finite {what}")
    return t


def parameters_vector(params: dict[str, Tensor]) -> Array:
    return np.concatenate([p.data.ravel() for p in params.values()])
