"""Reverse-mode differentiation on a Wengert tape.

A :class:`Tape` records every operation applied to its :class:`Variable`
objects, together with a closure that maps the output gradient to the
gradients of the parents. :func:`backward` walks the tape once, from the
root towards the leaves.

Every op also accepts plain arrays. When none of the inputs is a
``Variable`` the op just returns the numpy result, so the same loss code
serves as a metric and as a training objective.

Shapes must match exactly; Python scalars and 0-d arrays are the only
operands that broadcast. ``bias_add`` covers the one place the network
needs broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .errors import GradientError, ShapeError


@dataclass
class Node:
    op: str
    parents: tuple
    vjp: Callable | None


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def variable(self, value, dtype=None):
        """Register a leaf and return its Variable."""
        value = T.asarray(value, dtype)
        self.nodes.append(Node("leaf", (), None))
        return Variable(value, self, len(self.nodes) - 1)

    def record(self, op, value, parents, vjp):
        self.nodes.append(Node(op, tuple(parents), vjp))
        return Variable(value, self, len(self.nodes) - 1)


class Variable:
    __slots__ = ("value", "tape", "index")
    __array_priority__ = 100

    def __init__(self, value, tape, index):
        self.value = value
        self.tape = tape
        self.index = index

    shape = property(lambda self: self.value.shape)
    ndim = property(lambda self: self.value.ndim)
    dtype = property(lambda self: self.value.dtype)

    def __repr__(self):
        return f"Variable(shape={self.shape}, node={self.index})"

    def __len__(self):
        return len(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


class Gradients:
    """Mapping from Variable to gradient array; unreachable leaves get zeros."""

    def __init__(self, tape, grads):
        self._tape = tape
        self._grads = grads

    def __getitem__(self, var):
        if var.tape is not self._tape:
            raise GradientError("variable belongs to a different tape")
        g = self._grads[var.index] if var.index < len(self._grads) else None
        return np.zeros_like(var.value) if g is None else g

    def __contains__(self, var):
        return var.tape is self._tape


def backward(tape, root):
    """Gradients of the scalar ``root`` with respect to every variable on ``tape``."""
    if not isinstance(root, Variable) or root.tape is not tape:
        raise GradientError("root must be a Variable recorded on this tape")
    if root.value.size != 1:
        raise GradientError(f"root must be scalar-valued, got shape {root.shape}")
    grads = [None] * (root.index + 1)
    grads[root.index] = np.ones_like(root.value)
    for i in range(root.index, -1, -1):
        g = grads[i]
        node = tape.nodes[i]
        if g is None or node.vjp is None:
            continue
        for p, gp in zip(node.parents, node.vjp(g)):
            if p is None or gp is None:
                continue
            grads[p] = gp if grads[p] is None else grads[p] + gp
    return Gradients(tape, grads)


def grad(f, *xs):
    """Value and gradients of scalar ``f`` at the arrays ``xs``."""
    tape = Tape()
    vs = [tape.variable(x) for x in xs]
    out = f(*vs)
    if not isinstance(out, Variable):
        return np.asarray(out), [np.zeros_like(v.value) for v in vs]
    g = backward(tape, out)
    return out.value, [g[v] for v in vs]


def finite_diff_check(f, x, h=1e-5):
    """Max over coordinates of |analytic - central difference| / max(1e-8, |numeric|)."""
    x = np.asarray(x, dtype=np.float64)
    _, (analytic,) = grad(f, x)
    numeric = np.empty_like(x)
    flat = numeric.reshape(-1)
    for i in range(x.size):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] += h
        xm[i] -= h
        fp = float(np.asarray(value(f(xp.reshape(x.shape)))))
        fm = float(np.asarray(value(f(xm.reshape(x.shape)))))
        flat[i] = (fp - fm) / (2 * h)
    err = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(numeric))
    return float(err.max()) if err.size else 0.0


# -- plumbing -----------------------------------------------------------------


def value(x):
    return x.value if isinstance(x, Variable) else x


def _tape_of(inputs):
    tape = None
    for x in inputs:
        if isinstance(x, Variable):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise GradientError("operands are recorded on different tapes")
    return tape


def _record(op, out, inputs, vjp):
    """Attach ``out`` to the tape of ``inputs``; plain result if none are Variables."""
    tape = _tape_of(inputs)
    if tape is None:
        return out
    parents = [x.index if isinstance(x, Variable) else None for x in inputs]
    return tape.record(op, out, parents, vjp)


def _needs(x):
    return isinstance(x, Variable)


def _reduce_to(g, x):
    """Sum a broadcast gradient back down to the shape of a scalar operand."""
    if np.ndim(value(x)) == 0 and np.ndim(g) != 0:
        return np.sum(g)
    return g


def _check_binary(a, b, name):
    if np.ndim(a) != 0 and np.ndim(b) != 0 and np.shape(a) != np.shape(b):
        raise ShapeError(f"{name} operands have mismatched shapes {np.shape(a)} and {np.shape(b)}")


# -- elementwise --------------------------------------------------------------


def add(x, y):
    a, b = value(x), value(y)
    _check_binary(a, b, "add")
    out = a + b

    def vjp(g):
        return (_reduce_to(g, x) if _needs(x) else None, _reduce_to(g, y) if _needs(y) else None)

    return _record("add", out, (x, y), vjp)


def sub(x, y):
    a, b = value(x), value(y)
    _check_binary(a, b, "sub")
    out = a - b

    def vjp(g):
        return (_reduce_to(g, x) if _needs(x) else None, _reduce_to(-g, y) if _needs(y) else None)

    return _record("sub", out, (x, y), vjp)


def mul(x, y):
    a, b = value(x), value(y)
    _check_binary(a, b, "mul")
    out = a * b

    def vjp(g):
        return (
            _reduce_to(g * b, x) if _needs(x) else None,
            _reduce_to(g * a, y) if _needs(y) else None,
        )

    return _record("mul", out, (x, y), vjp)


def div(x, y):
    a, b = value(x), value(y)
    _check_binary(a, b, "div")
    out = a / b

    def vjp(g):
        return (
            _reduce_to(g / b, x) if _needs(x) else None,
            _reduce_to(-g * out / b, y) if _needs(y) else None,
        )

    return _record("div", out, (x, y), vjp)


def square(x):
    a = value(x)
    return _record("square", a * a, (x,), lambda g: (2.0 * a * g,))


def sqrt(x):
    out = np.sqrt(value(x))
    return _record("sqrt", out, (x,), lambda g: (g / (2.0 * out),))


def exp(x):
    out = np.exp(value(x))
    return _record("exp", out, (x,), lambda g: (g * out,))


def log(x):
    a = value(x)
    out = T.log(a)
    return _record("log", out, (x,), lambda g: (g / a,))


def sigmoid(x):
    out = T.sigmoid(value(x))
    return _record("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(value(x))
    return _record("tanh", out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x):
    a = value(x)
    mask = a > 0
    return _record("relu", np.where(mask, a, 0.0).astype(a.dtype, copy=False), (x,), lambda g: (g * mask,))


def absolute(x):
    a = value(x)
    # sign(0) = 0, the subgradient midpoint
    return _record("abs", np.abs(a), (x,), lambda g: (g * np.sign(a),))


def atan2(y, x):
    """Elementwise angle of (x, y) on the principal branch (-pi, pi]; (0, 0) maps to 0."""
    b, a = value(y), value(x)
    _check_binary(a, b, "atan2")
    out = np.arctan2(b, a)
    out = np.where(out <= -np.pi, np.pi, out)
    r2 = a * a + b * b
    zero = r2 == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, r2))

    def vjp(g):
        return (g * a * inv if _needs(y) else None, -g * b * inv if _needs(x) else None)

    return _record("atan2", out, (y, x), vjp)


def hypot(x, y):
    """Elementwise sqrt(x^2 + y^2); its gradient at the origin is taken as 0."""
    a, b = value(x), value(y)
    _check_binary(a, b, "hypot")
    out = np.sqrt(a * a + b * b)
    zero = out == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, out))

    def vjp(g):
        return (g * a * inv if _needs(x) else None, g * b * inv if _needs(y) else None)

    return _record("hypot", out, (x, y), vjp)


def wrap_angle(x):
    """Map angles to the principal value in (-pi, pi]; derivative 1 away from the cut."""
    a = value(x)
    out = a - 2 * np.pi * np.ceil((a - np.pi) / (2 * np.pi))
    return _record("wrap_angle", out, (x,), lambda g: (g,))


def sigmoid_cross_entropy(logits, targets):
    """Elementwise binary cross-entropy of sigmoid(logits) against targets, overflow-safe."""
    z, t = value(logits), value(targets)
    _check_binary(z, t, "sigmoid_cross_entropy")
    out = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))

    def vjp(g):
        s = T.sigmoid(z)
        return (g * (s - t) if _needs(logits) else None, g * -z if _needs(targets) else None)

    return _record("sigmoid_ce", out, (logits, targets), vjp)


# -- reductions and shape -----------------------------------------------------


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x, axis=None):
    a = value(x)
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a, axis=axes)

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axes), a.shape).copy(),)

    return _record("sum", out, (x,), vjp)


def mean(x, axis=None):
    a = value(x)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    out = np.mean(a, axis=axes)

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axes) / count, a.shape).copy(),)

    return _record("mean", out, (x,), vjp)


def reshape(x, shape):
    a = value(x)
    return _record("reshape", a.reshape(shape), (x,), lambda g: (g.reshape(a.shape),))


def transpose(x, axes=None):
    a = value(x)
    out = np.transpose(a, axes)
    inv = None if axes is None else np.argsort(axes)
    return _record("transpose", out, (x,), lambda g: (np.transpose(g, inv),))


def getitem(x, idx):
    a = value(x)
    out = a[idx]

    def vjp(g):
        full = np.zeros_like(a)
        np.add.at(full, idx, g)
        return (full,)

    return _record("getitem", out, (x,), vjp)


def matmul(x, y):
    a, b = value(x), value(y)
    out = T.matmul(a, b)

    def vjp(g):
        return (
            g @ np.swapaxes(b, -1, -2) if _needs(x) else None,
            np.swapaxes(a, -1, -2) @ g if _needs(y) else None,
        )

    return _record("matmul", out, (x, y), vjp)


def sandwich(left, x, right):
    """``left @ x @ right.T`` over the last two axes of ``x``, for constant matrices."""
    a = value(x)
    if a.ndim < 2 or left.shape[1] != a.shape[-2] or right.shape[1] != a.shape[-1]:
        raise ShapeError(f"sandwich shapes {left.shape}, {a.shape}, {right.shape} are incompatible")
    out = left @ a @ right.T
    return _record("sandwich", out, (x,), lambda g: (left.T @ g @ right,))


def bias_add(x, b, axis=-1):
    """Add the 1-D ``b`` along ``axis`` of ``x``, broadcasting over the others."""
    a, bb = value(x), value(b)
    axis = axis % a.ndim
    if bb.ndim != 1 or bb.shape[0] != a.shape[axis]:
        raise ShapeError(f"bias of shape {bb.shape} does not fit axis {axis} of {a.shape}")
    shape = [1] * a.ndim
    shape[axis] = -1
    out = a + bb.reshape(shape)
    others = tuple(i for i in range(a.ndim) if i != axis)

    def vjp(g):
        return (g if _needs(x) else None, np.sum(g, axis=others) if _needs(b) else None)

    return _record("bias_add", out, (x, b), vjp)


def broadcast_const(c, shape):
    """Materialize a constant array at ``shape`` (explicit broadcasting of constants)."""
    return np.broadcast_to(np.asarray(c), shape)


# -- convolution --------------------------------------------------------------


def conv2d(x, kernel, stride=1, padding="valid"):
    a, k = value(x), value(kernel)
    out = T.conv2d(a, k, stride, padding)

    def vjp(g):
        gx = gk = None
        if _needs(x):
            gx = T.conv2d_transpose(g, k, stride, padding, output_size=a.shape[-2:])
        if _needs(kernel):
            gk = T.conv2d_kernel_grad(a, g, k.shape[2], stride, padding)
        return gx, gk

    return _record("conv2d", out, (x, kernel), vjp)


def conv2d_transpose(x, kernel, stride=1, padding="valid", output_size=None):
    a, k = value(x), value(kernel)
    out = T.conv2d_transpose(a, k, stride, padding, output_size)

    def vjp(g):
        gx = gk = None
        if _needs(x):
            gx = T.conv2d(g, k, stride, padding)
        if _needs(kernel):
            gk = T.conv2d_kernel_grad(g, a, k.shape[2], stride, padding)
        return gx, gk

    return _record("conv2d_transpose", out, (x, kernel), vjp)
