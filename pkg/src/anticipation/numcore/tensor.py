"""Dense float64 tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array plus an optional gradient.  Each
operation records its parents and a backward closure on a tape; calling
:meth:`Tensor.backward` on a scalar output walks the graph in reverse
topological order and accumulates gradients into every reachable leaf
with ``requires_grad`` set.

Values are immutable once constructed (the optimizer mutates parameter
``data`` in place between graph builds, on the single training thread).
The tape itself is single-threaded; sharing read-only tensors across
threads is safe.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


_grad_enabled = True


class no_grad:
    """Context manager disabling tape construction (evaluation paths)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return np.ascontiguousarray(arr)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce `grad` back to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basic introspection -------------------------------------------------

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
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph construction ---------------------------------------------------

    @staticmethod
    def _result(data, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.size != 1:
                raise ShapeError(
                    f"backward() without an explicit gradient requires a scalar, "
                    f"got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = _as_array(grad)

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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg.copy() if pg.base is not None else pg

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(g):
            return (
                (self, _unbroadcast(g, self.shape)),
                (other, _unbroadcast(g, other.shape)),
            )

        return Tensor._result(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            return ((self, -g),)

        return Tensor._result(-self.data, (self,), backward)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(g):
            return (
                (self, _unbroadcast(g, self.shape)),
                (other, _unbroadcast(-g, other.shape)),
            )

        return Tensor._result(self.data - other.data, (self, other), backward)

    def __rsub__(self, other):
        return Tensor(other).__sub__(self)

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(g):
            return (
                (self, _unbroadcast(g * other.data, self.shape)),
                (other, _unbroadcast(g * self.data, other.shape)),
            )

        return Tensor._result(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def backward(g):
            return (
                (self, _unbroadcast(g / other.data, self.shape)),
                (other, _unbroadcast(-g * self.data / other.data**2, other.shape)),
            )

        return Tensor._result(self.data / other.data, (self, other), backward)

    def __matmul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self.data, other.data
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(
                f"matmul: incompatible shapes {a.shape} and {b.shape}"
            )

        def backward(g):
            da = _unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape)
            db = _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape)
            return ((self, da), (other, db))

        return Tensor._result(a @ b, (self, other), backward)

    # -- reductions and reshaping ----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        def backward(g):
            if axis is None:
                return ((self, np.broadcast_to(g, self.shape).copy()),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return ((self, np.broadcast_to(gg, self.shape).copy()),)

        return Tensor._result(
            self.data.sum(axis=axis, keepdims=keepdims), (self,), backward
        )

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.size
        else:
            count = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape

        def backward(g):
            return ((self, g.reshape(old)),)

        return Tensor._result(
            np.ascontiguousarray(self.data.reshape(shape)), (self,), backward
        )

    def transpose(self, axes: Sequence[int]):
        axes = tuple(axes)
        inverse = tuple(np.argsort(axes))

        def backward(g):
            return ((self, np.ascontiguousarray(g.transpose(inverse))),)

        return Tensor._result(
            np.ascontiguousarray(self.data.transpose(axes)), (self,), backward
        )

    def __getitem__(self, key):
        def backward(g):
            full = np.zeros_like(self.data)
            full[key] += g
            return ((self, full),)

        return Tensor._result(
            np.ascontiguousarray(self.data[key]), (self,), backward
        )

    def broadcast_to(self, shape):
        shape = tuple(shape)

        def backward(g):
            return ((self, _unbroadcast(g, self.shape)),)

        return Tensor._result(
            np.broadcast_to(self.data, shape).copy(), (self,), backward
        )

    # -- elementwise nonlinearities ---------------------------------------------

    def relu(self):
        mask = self.data > 0

        def backward(g):
            return ((self, g * mask),)

        return Tensor._result(np.where(mask, self.data, 0.0), (self,), backward)

    def tanh(self):
        out_data = np.tanh(self.data)

        def backward(g):
            return ((self, g * (1.0 - out_data**2)),)

        return Tensor._result(out_data, (self,), backward)

    def sigmoid(self):
        out_data = np.empty_like(self.data)
        pos = self.data >= 0
        out_data[pos] = 1.0 / (1.0 + np.exp(-self.data[pos]))
        e = np.exp(self.data[~pos])
        out_data[~pos] = e / (1.0 + e)

        def backward(g):
            return ((self, g * out_data * (1.0 - out_data)),)

        return Tensor._result(out_data, (self,), backward)

    def log(self):
        def backward(g):
            return ((self, g / self.data),)

        return Tensor._result(np.log(self.data), (self,), backward)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def backward(g):
            return ((self, g * 0.5 / out_data),)

        return Tensor._result(out_data, (self,), backward)

    def clip_min(self, lo: float):
        """Elementwise max(x, lo); gradient is zero where clipped."""
        mask = self.data >= lo

        def backward(g):
            return ((self, g * mask),)

        return Tensor._result(np.maximum(self.data, lo), (self,), backward)

    def masked_fill(self, mask: np.ndarray, value: float):
        """Replace entries where `mask` is True with `value` (no gradient there)."""
        keep = ~np.asarray(mask, dtype=bool)

        def backward(g):
            return ((self, g * keep),)

        return Tensor._result(
            np.where(keep, self.data, value), (self,), backward
        )


# -- module-level operations ------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        moved = np.moveaxis(g, axis, 0)
        pieces = []
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            piece = np.moveaxis(moved[start:stop], 0, axis)
            pieces.append((t, np.ascontiguousarray(piece)))
        return tuple(pieces)

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._result(data, tuple(tensors), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along `axis`, numerically stabilized by max subtraction."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[axis] < 1:
        raise ShapeError(f"softmax: empty axis {axis} of shape {x.shape}")
    moved = np.moveaxis(x.data, axis, -1)
    lead = moved.shape[:-1]
    n = moved.shape[-1]
    rows = np.ascontiguousarray(moved.reshape(-1, n))
    y2d = kernels.softmax_fwd(rows)
    out_data = np.moveaxis(y2d.reshape(lead + (n,)), -1, axis)

    def backward(g):
        g_rows = np.ascontiguousarray(np.moveaxis(g, axis, -1).reshape(-1, n))
        dx = kernels.softmax_bwd(y2d, g_rows)
        dx = np.moveaxis(dx.reshape(lead + (n,)), -1, axis)
        return ((x, np.ascontiguousarray(dx)),)

    return Tensor._result(np.ascontiguousarray(out_data), (x,), backward)


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-slice normalization over the last axis, then affine transform."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    gain = gain if isinstance(gain, Tensor) else Tensor(gain)
    bias = bias if isinstance(bias, Tensor) else Tensor(bias)
    d = x.shape[-1]
    lead = x.shape[:-1]
    rows = np.ascontiguousarray(x.data.reshape(-1, d))
    y2d, xhat, inv_std = kernels.layernorm_fwd(rows, gain.data, bias.data, eps)

    def backward(g):
        g2d = np.ascontiguousarray(g.reshape(-1, d))
        dx, dgain, dbias = kernels.layernorm_bwd(xhat, inv_std, gain.data, g2d)
        return (
            (x, dx.reshape(x.shape)),
            (gain, dgain),
            (bias, dbias),
        )

    return Tensor._result(y2d.reshape(lead + (d,)), (x, gain, bias), backward)


def gru_cell(x: Tensor, h: Tensor, wz, uz, bz, wr, ur, br, wh, uh, bh) -> Tensor:
    """One fused gated-recurrent step; see kernels for the gate equations."""
    params = (wz, uz, bz, wr, ur, br, wh, uh, bh)
    h_new, z, r, hbar = kernels.gru_fwd(
        x.data, h.data, *[p.data for p in params]
    )

    def backward(g):
        grads = kernels.gru_bwd(
            x.data, h.data, z, r, hbar,
            wz.data, uz.data, wr.data, ur.data, wh.data, uh.data,
            np.ascontiguousarray(g),
        )
        parents = (x, h) + params
        return tuple(zip(parents, grads))

    return Tensor._result(h_new, (x, h) + params, backward)


def take_along_last(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick one entry per row of a 2D tensor: out[i] = x[i, idx[i]]."""
    idx = np.asarray(idx, dtype=np.int64)
    out_data = np.take_along_axis(x.data, idx[:, None], axis=1)[:, 0]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (np.arange(x.shape[0]), idx), g)
        return ((x, full),)

    return Tensor._result(out_data, (x,), backward)


def take_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows by integer index (rows may repeat)."""
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return ((x, full),)

    return Tensor._result(np.ascontiguousarray(x.data[idx]), (x,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(a)
    return a @ b


def parameters(*groups: Iterable[Tensor]) -> list[Tensor]:
    """Flatten nested parameter iterables into one list."""
    out: list[Tensor] = []
    for group in groups:
        if isinstance(group, Tensor):
            out.append(group)
        else:
            out.extend(parameters(*group))
    return out
