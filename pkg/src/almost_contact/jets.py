"""Forward-mode differentiation with nestable dual numbers.

A :class:`Jet` holds a value and its gradient with respect to ``m`` seed
variables.  Both parts may themselves be jets, so differentiating an
expression that was already differentiated just wraps one more layer around
the inputs.  That is how exterior derivatives of exterior derivatives, and
derivatives of pulled-back forms, are computed without finite differences.

Shape convention: every node has an "S-shape" (batch and coefficient axes).
A plain ``ndarray`` node has shape equal to its S-shape.  For ``Jet(val,
grad)`` with S-shape ``S``, ``val`` has S-shape ``S`` and ``grad`` has S-shape
``S + (m,)``.  Axis helpers below take positions counted from the end of the
S-shape, which keeps them valid at every nesting depth.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "grad")
    # make ndarray binary operators defer to the reflected Jet methods
    __array_ufunc__ = None

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    @property
    def nvars(self) -> int:
        return _sshape(self.grad)[-1]

    @property
    def shape(self) -> tuple:
        return _sshape(self.val)

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, nvars={self.nvars}, depth={depth(self)})"

    def __neg__(self):
        return Jet(-self.val, -self.grad)

    def __pos__(self):
        return self

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -other)

    def __rsub__(self, other):
        return add(-self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __pow__(self, p):
        return power(self, p)


def is_jet(x) -> bool:
    return isinstance(x, Jet)


def base(x) -> np.ndarray:
    """Innermost plain value of a (possibly nested) jet."""
    while isinstance(x, Jet):
        x = x.val
    return np.asarray(x)


def depth(x) -> int:
    d = 0
    while isinstance(x, Jet):
        x = x.val
        d += 1
    return d


def _sshape(x) -> tuple:
    return np.shape(base(x))


def insert_axis(x, from_end: int = 0):
    """Insert a singleton S-axis ``from_end`` positions before the end."""
    if isinstance(x, Jet):
        return Jet(insert_axis(x.val, from_end), insert_axis(x.grad, from_end + 1))
    x = np.asarray(x)
    return np.expand_dims(x, x.ndim - from_end)


def add(a, b):
    if isinstance(a, Jet):
        if isinstance(b, Jet):
            return Jet(a.val + b.val, a.grad + b.grad)
        return Jet(a.val + b, a.grad)
    if isinstance(b, Jet):
        return Jet(a + b.val, b.grad)
    return np.add(a, b)


def mul(a, b):
    if isinstance(a, Jet):
        if isinstance(b, Jet):
            return Jet(
                a.val * b.val,
                insert_axis(a.val) * b.grad + insert_axis(b.val) * a.grad,
            )
        return Jet(a.val * b, insert_axis(b) * a.grad)
    if isinstance(b, Jet):
        return Jet(a * b.val, insert_axis(a) * b.grad)
    return np.multiply(a, b)


def _chain(x, f, df):
    """Apply ``f`` with derivative ``df``; both must accept jets."""
    return Jet(f(x.val), insert_axis(df(x.val)) * x.grad)


def reciprocal(x):
    if isinstance(x, Jet):
        return _chain(x, reciprocal, lambda u: -(reciprocal(u) * reciprocal(u)))
    return 1.0 / np.asarray(x, dtype=float)


def divide(a, b):
    """Quotient whose primal part is the exact floating-point quotient."""
    if isinstance(b, Jet):
        q = divide(a.val if isinstance(a, Jet) else a, b.val)
        inv = reciprocal(b.val)
        ga = a.grad if isinstance(a, Jet) else 0.0
        return Jet(q, insert_axis(inv) * (ga - insert_axis(q) * b.grad))
    if isinstance(a, Jet):
        return Jet(divide(a.val, b), insert_axis(reciprocal(b)) * a.grad)
    return np.divide(a, b)


def logistic(x):
    """``1 / (1 + exp(-x))``, evaluated without overflow."""
    if isinstance(x, Jet):
        return _chain(x, logistic, lambda u: logistic(u) * logistic(-u))
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def power(x, p):
    if isinstance(x, Jet):
        if p == 0:
            return np.ones(x.shape)
        return _chain(x, lambda u: power(u, p), lambda u: p * power(u, p - 1))
    return np.power(np.asarray(x, dtype=float), p)


def sin(x):
    if isinstance(x, Jet):
        return _chain(x, sin, cos)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return _chain(x, cos, lambda u: -sin(u))
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet):
        return _chain(x, exp, exp)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        return _chain(x, log, reciprocal)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        return _chain(x, sqrt, lambda u: 0.5 * reciprocal(sqrt(u)))
    return np.sqrt(x)


def where(mask, a, b):
    """Elementwise select; ``mask`` is a plain boolean array of S-shape."""
    return _where(np.asarray(mask, dtype=bool), a, b, 0)


def _where(mask, a, b, extra):
    if isinstance(a, Jet) or isinstance(b, Jet):
        a, b = _lift_pair(a, b)
        return Jet(_where(mask, a.val, b.val, extra), _where(mask, a.grad, b.grad, extra + 1))
    m = mask.reshape(mask.shape + (1,) * extra)
    return np.where(m, a, b)


def _lift_pair(a, b):
    if not isinstance(a, Jet):
        a = lift(a, b.nvars, _sshape(b.val))
    if not isinstance(b, Jet):
        b = lift(b, a.nvars, _sshape(a.val))
    return a, b


def lift(c, nvars: int, shape: tuple | None = None) -> Jet:
    """Constant ``c`` as a jet with zero gradient."""
    c = np.asarray(c, dtype=float)
    if shape is not None:
        c = np.broadcast_to(c, np.broadcast_shapes(c.shape, shape))
    return Jet(c, np.zeros(c.shape + (nvars,)))


def stack(items, from_end: int = 0):
    """Stack nodes along a new S-axis placed ``from_end`` before the end."""
    jets = [x for x in items if isinstance(x, Jet)]
    if not jets:
        arrs = [np.asarray(x, dtype=float) for x in items]
        shape = np.broadcast_shapes(*(a.shape for a in arrs))
        arrs = [np.broadcast_to(a, shape) for a in arrs]
        return np.stack(arrs, axis=len(shape) - from_end)
    shape = np.broadcast_shapes(*(_sshape(x) for x in items))
    m = jets[0].nvars
    lifted = [x if isinstance(x, Jet) else lift(x, m, shape) for x in items]
    vals = [_broadcast(x.val, shape) for x in lifted]
    grads = [_broadcast(x.grad, shape + (m,)) for x in lifted]
    return Jet(stack(vals, from_end), stack(grads, from_end + 1))


def _broadcast(x, shape):
    if isinstance(x, Jet):
        if _sshape(x) == tuple(shape):
            return x
        return Jet(_broadcast(x.val, shape), _broadcast(x.grad, tuple(shape) + (x.nvars,)))
    return np.broadcast_to(np.asarray(x, dtype=float), shape)


def s_linear(x, M: np.ndarray, k: int = 1, from_end: int = 0):
    """Contract the ``k`` trailing S-axes (flattened) with the matrix ``M``.

    The block of axes ends ``from_end`` positions before the end of the
    S-shape and is replaced by one axis of length ``M.shape[1]``.
    """
    if isinstance(x, Jet):
        return Jet(s_linear(x.val, M, k, from_end), s_linear(x.grad, M, k, from_end + 1))
    x = np.asarray(x, dtype=float)
    start = x.ndim - from_end - k
    head, tail = x.shape[:start], x.shape[x.ndim - from_end:]
    y = x.reshape(head + (-1,) + tail)
    if from_end == 0:
        return y @ M
    y = np.moveaxis(y, start, -1) @ M
    return np.moveaxis(y, -1, start)


def variables(coords):
    """Wrap coordinate nodes so that results carry one more derivative layer."""
    coords = tuple(coords)
    m = len(coords)
    shape = np.broadcast_shapes(*(_sshape(c) for c in coords))
    eye = np.eye(m)
    return tuple(
        Jet(_broadcast(c, shape), np.broadcast_to(eye[i], shape + (m,)))
        for i, c in enumerate(coords)
    )


def derivative(x, nvars: int, shape: tuple):
    """Outermost gradient of ``x``; zeros when ``x`` does not depend on the seeds."""
    if isinstance(x, Jet):
        return _broadcast(x.grad, tuple(shape) + (nvars,))
    return np.zeros(tuple(shape) + (nvars,))


def primal(x):
    """Outermost value of ``x`` (drops one derivative layer)."""
    return x.val if isinstance(x, Jet) else x
