"""Differential forms as fields over coordinate charts.

A :class:`DifferentialForm` is a function from coordinate nodes (plain arrays or
:class:`~almost_contact.jets.Jet` nodes) to an
:class:`~almost_contact.exterior.AlternatingFormValue`.  Exterior derivative and
pullback are themselves forms of this kind, so they compose freely and stay
analytic to any order: each derivative wraps the inputs in one more jet layer.
Forms whose coefficient function only accepts plain arrays fall back to
Richardson-extrapolated central differences (first derivatives only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, Sequence

import numpy as np

from . import jets
from .exterior import (
    AlternatingFormValue,
    ContractError,
    basis,
    merge,
    pull_back_linear,
    rank,
    wedge,
)


class FormEvaluationError(RuntimeError):
    """A form could not be evaluated at some point."""


class SamplingError(RuntimeError):
    """A sampler could not produce enough points in its domain."""


# --------------------------------------------------------------------------
# charts


class Chart:
    """A coordinate chart with a seeded sampler and a declared orientation.

    ``sampler(rng, count)`` returns candidate points; ``contains(points)`` is the
    domain predicate; ``orientation(*coords)`` returns a top-degree value that
    is declared positive.
    """

    def __init__(
        self,
        name: str,
        coords: Sequence[str],
        sampler: Callable[[np.random.Generator, int], np.ndarray],
        contains: Callable[[np.ndarray], np.ndarray] | None = None,
        orientation: Callable | None = None,
    ):
        self.name = name
        self.coords = tuple(coords)
        self.dim = len(self.coords)
        self._sampler = sampler
        self._contains = contains
        self._orientation = orientation

    def __repr__(self) -> str:
        return f"Chart({self.name!r}, coords={self.coords})"

    @property
    def chart(self) -> "Chart":
        return self

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def _key(self, key) -> tuple[int, ...]:
        if isinstance(key, str):
            key = tuple(k.strip() for k in key.split("^")) if key else ()
        return tuple(self.index(k) if isinstance(k, str) else int(k) for k in key)

    def terms(self, mapping: dict) -> AlternatingFormValue:
        """Value from ``{"dz^dx": coeff, ...}``-style keys (``d`` prefix optional)."""
        parsed = {}
        for key, c in mapping.items():
            if isinstance(key, str):
                key = tuple(k.strip().removeprefix("d") for k in key.split("^"))
            parsed[self._key(key)] = c
        degrees = {len(k) for k in parsed}
        if len(degrees) != 1:
            raise ContractError(f"terms must share one degree, got {sorted(degrees)}")
        return AlternatingFormValue.from_terms(self.dim, degrees.pop(), parsed)

    def d(self, name: str) -> AlternatingFormValue:
        """Constant basis covector ``d<name>``."""
        c = np.zeros(self.dim)
        c[self.index(name)] = 1.0
        return AlternatingFormValue(self.dim, 1, c)

    def zero(self, degree: int) -> AlternatingFormValue:
        return AlternatingFormValue.zero(self.dim, degree)

    def form(self, degree: int, fn: Callable, name: str = "", analytic: bool = True):
        return DifferentialForm(self, degree, fn, name=name, analytic=analytic)

    @property
    def orientation(self) -> "DifferentialForm":
        if self._orientation is None:
            raise ContractError(f"chart {self.name} has no orientation form")
        return DifferentialForm(self, self.dim, self._orientation, name=f"vol[{self.name}]")

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self._contains is None:
            return np.ones(len(points), dtype=bool)
        return np.asarray(self._contains(points), dtype=bool)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Deterministic sample of ``count`` points of the chart domain."""
        if count < 1:
            raise ContractError("sample count must be at least 1")
        rng = np.random.default_rng(seed)
        pts = np.asarray(self._sampler(rng, count), dtype=float)
        if pts.shape != (count, self.dim):
            raise SamplingError(f"sampler for {self.name} returned shape {pts.shape}")
        if not self.contains(pts).all():
            raise SamplingError(f"sampler for {self.name} left its domain")
        if self._orientation is not None:
            vol = self.orientation.at(pts).values()[..., 0]
            if not np.all(np.abs(vol) > 0):
                raise SamplingError(f"orientation of {self.name} vanishes at a sample")
        return pts

    def density(self, form: "DifferentialForm", points: np.ndarray) -> np.ndarray:
        """Top-degree ``form`` divided by the orientation form, pointwise."""
        if form.degree != self.dim:
            raise ContractError(f"density needs a degree-{self.dim} form, got {form.degree}")
        top = form.at(points).values()[..., 0]
        vol = self.orientation.at(points).values()[..., 0]
        if np.any(vol == 0):
            raise FormEvaluationError(f"orientation of {self.name} vanishes")
        return top / vol


def rejection_sample(rng, count, draw, accept, max_rounds: int = 200) -> np.ndarray:
    """Draw batches with ``draw(rng, n)`` until ``count`` points pass ``accept``."""
    kept: list[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        batch = draw(rng, max(2 * (count - have), 16))
        ok = batch[accept(batch)]
        kept.append(ok)
        have += len(ok)
        if have >= count:
            return np.concatenate(kept)[:count]
    raise SamplingError(f"rejection sampling produced {have} of {count} points")


def box_sampler(lows, highs):
    lows, highs = np.asarray(lows, float), np.asarray(highs, float)

    def draw(rng, n):
        return lows + (highs - lows) * rng.random((n, len(lows)))

    return draw


# --------------------------------------------------------------------------
# forms


def _coords_of(points) -> tuple:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return tuple(points[:, i] for i in range(points.shape[1]))


class DifferentialForm:
    """A degree-``degree`` form field on ``chart``.

    ``fn(*coords)`` returns an :class:`AlternatingFormValue` or a ``terms``
    mapping.  With ``analytic=True`` it must accept jet inputs (use the
    functions in :mod:`almost_contact.jets`); otherwise derivatives are taken by
    finite differences.
    """

    def __init__(self, chart: Chart, degree: int, fn: Callable, *, name: str = "",
                 analytic: bool = True, raw: bool = False):
        if not 0 <= degree:
            raise ContractError("degree must be non-negative")
        self.chart = chart
        self.degree = degree
        self.name = name
        self.analytic = analytic
        self._fn = fn
        self._raw = raw  # fn already takes the coordinate tuple

    def __repr__(self) -> str:
        return f"DifferentialForm({self.name or '?'}, degree={self.degree}, chart={self.chart.name})"

    # evaluation -----------------------------------------------------------

    def field(self, coords) -> AlternatingFormValue:
        coords = tuple(coords)
        if len(coords) != self.chart.dim:
            raise ContractError(f"{self.chart.name} needs {self.chart.dim} coordinates")
        if not self.analytic and any(jets.is_jet(c) for c in coords):
            return self._fd_field(coords)
        out = self._fn(coords) if self._raw else self._fn(*coords)
        if isinstance(out, dict):
            out = self.chart.terms(out)
        if out.dim != self.chart.dim or out.degree != self.degree:
            raise ContractError(
                f"form {self.name} produced degree {out.degree} in dim {out.dim}"
            )
        return out

    def at(self, points) -> AlternatingFormValue:
        """Plain values at an ``(N, dim)`` array of points."""
        coords = _coords_of(points)
        val = self.field(coords)
        n = len(coords[0])
        c = np.broadcast_to(val.values(), (n,) + val.values().shape[-1:]).copy()
        if not np.all(np.isfinite(c)):
            raise FormEvaluationError(f"non-finite coefficient in {self.name or 'form'}")
        return AlternatingFormValue(val.dim, val.degree, c, val.overflow)

    def jet(self, points, order: int) -> AlternatingFormValue:
        """Values carrying ``order`` nested derivative layers."""
        coords = _coords_of(points)
        for _ in range(order):
            coords = jets.variables(coords)
        return self.field(coords)

    def jacobian(self, points) -> np.ndarray:
        """All first partials of all coefficients, shape ``(N, C, dim)``."""
        coords = _coords_of(points)
        n = len(coords[0])
        val = self.field(jets.variables(coords))
        C = comb(self.chart.dim, self.degree) if self.degree <= self.chart.dim else 0
        return np.broadcast_to(
            jets.derivative(val.coeffs, self.chart.dim, jets.base(val.coeffs).shape),
            (n, C, self.chart.dim),
        ).copy()

    def _fd_field(self, coords) -> AlternatingFormValue:
        if any(jets.depth(c) > 1 or jets.is_jet(jets.primal(c)) for c in coords):
            raise FormEvaluationError(
                f"{self.name or 'form'} has no analytic derivatives beyond first order"
            )
        points = np.stack([jets.base(c) for c in coords], axis=-1)
        fn = lambda p: np.broadcast_to(  # noqa: E731
            self._plain(p), (len(p), comb(self.chart.dim, self.degree))
        )
        val = fn(points)
        jac = finite_difference_jacobian(fn, points)
        nv = next(c.nvars for c in coords if jets.is_jet(c))
        cg = np.stack(
            [np.broadcast_to(jets.derivative(c, nv, (len(points),)), (len(points), nv))
             for c in coords], axis=1)
        grad = np.einsum("ncj,njv->ncv", jac, cg)
        return AlternatingFormValue(self.chart.dim, self.degree, jets.Jet(val, grad))

    def _plain(self, points):
        coords = _coords_of(points)
        out = self._fn(coords) if self._raw else self._fn(*coords)
        if isinstance(out, dict):
            out = self.chart.terms(out)
        return out.values()

    # algebra --------------------------------------------------------------

    def _binary(self, other, op, name):
        if other.chart is not self.chart or other.degree != self.degree:
            raise ContractError("forms must share chart and degree")
        return DifferentialForm(
            self.chart, self.degree,
            lambda coords: op(self.field(coords), other.field(coords)),
            name=name, raw=True,
            analytic=self.analytic and other.analytic,
        )

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b, f"({self.name}+{other.name})")

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b, f"({self.name}-{other.name})")

    def __neg__(self):
        return DifferentialForm(self.chart, self.degree, lambda coords: -self.field(coords),
                                name=f"-{self.name}", raw=True, analytic=self.analytic)

    def __mul__(self, c: float):
        if not np.isscalar(c):
            return NotImplemented
        return DifferentialForm(self.chart, self.degree, lambda coords: self.field(coords) * c,
                                name=f"{c}*{self.name}", raw=True, analytic=self.analytic)

    __rmul__ = __mul__

    def wedge(self, other: "DifferentialForm") -> "DifferentialForm":
        if other.chart is not self.chart:
            raise ContractError("wedge of forms on different charts")
        return DifferentialForm(
            self.chart, self.degree + other.degree,
            lambda coords: wedge(self.field(coords), other.field(coords)),
            name=f"{self.name}^{other.name}", raw=True,
            analytic=self.analytic and other.analytic,
        )

    def power(self, n: int) -> "DifferentialForm":
        out = self
        for _ in range(n - 1):
            out = out.wedge(self)
        return out


def wedge_forms(*forms: DifferentialForm) -> DifferentialForm:
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out


def finite_difference_jacobian(fn, points: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences with one Richardson level; returns ``(N, C, m)``."""
    points = np.asarray(points, dtype=float)
    cols = []
    for j in range(points.shape[1]):
        h = step * (1.0 + np.abs(points[:, j]))[:, None]

        def central(hh):
            up, dn = points.copy(), points.copy()
            up[:, j] += hh[:, 0]
            dn[:, j] -= hh[:, 0]
            return (np.asarray(fn(up)) - np.asarray(fn(dn))) / (2.0 * hh)

        coarse, fine = central(h), central(h / 2.0)
        cols.append((4.0 * fine - coarse) / 3.0)
    out = np.stack(cols, axis=-1)
    if not np.all(np.isfinite(out)):
        raise FormEvaluationError("non-finite finite-difference derivative")
    return out


# --------------------------------------------------------------------------
# exterior derivative and pullback


@lru_cache(maxsize=None)
def _d_table(m: int, k: int) -> np.ndarray:
    """Signed scatter from flattened partials (I, j) to degree-(k+1) ranks."""
    rows = basis(m, k)
    table = np.zeros((len(rows) * m, comb(m, k + 1)))
    for ii, I in enumerate(rows):
        for j in range(m):
            sign, K = merge((j,), I)
            if sign:
                table[ii * m + j, rank(K)] = sign
    return table


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    """``d a``; at top degree returns the flagged overflow zero of degree dim+1."""
    chart, m, k = a.chart, a.chart.dim, a.degree
    if k >= m:
        return DifferentialForm(
            chart, k + 1,
            lambda coords: AlternatingFormValue.zero(m, k + 1, jets.base(coords[0]).shape),
            name=f"d{a.name}", raw=True,
        )
    table = _d_table(m, k)

    def field(coords):
        val = a.field(jets.variables(coords))
        shape = jets.base(val.coeffs).shape
        g = jets.derivative(val.coeffs, m, shape)
        return AlternatingFormValue(m, k + 1, jets.s_linear(g, table, k=2))

    return DifferentialForm(chart, k + 1, field, name=f"d{a.name}", raw=True,
                            analytic=a.analytic)


@dataclass(frozen=True)
class SmoothMap:
    """A smooth map between charts; ``fn(*coords)`` returns codomain coordinates."""

    domain: Chart
    codomain: Chart
    fn: Callable
    name: str = ""

    def __call__(self, points) -> np.ndarray:
        comps = self.fn(*_coords_of(points))
        n = len(np.atleast_2d(points))
        return np.stack([np.broadcast_to(jets.base(c), (n,)) for c in comps], axis=-1)

    def jacobian(self, points) -> np.ndarray:
        """``(N, codomain.dim, domain.dim)``."""
        coords = _coords_of(points)
        n, p = len(coords[0]), self.domain.dim
        comps = self.fn(*jets.variables(coords))
        return np.stack(
            [np.broadcast_to(jets.derivative(c, p, (n,)), (n, p)) for c in comps], axis=1
        )


def pullback(F: SmoothMap, a: DifferentialForm) -> DifferentialForm:
    """``F^* a`` on ``F.domain``; pointwise linear pullback by the Jacobian of F."""
    if a.chart is not F.codomain:
        raise ContractError(f"{F.name} maps into {F.codomain.name}, form lives on {a.chart.name}")
    p = F.domain.dim

    def field(coords):
        X = jets.variables(coords)
        Y = F.fn(*X)
        if len(Y) != F.codomain.dim:
            raise ContractError(f"{F.name} returned {len(Y)} coordinates")
        shape = np.broadcast_shapes(*(jets.base(c).shape for c in coords))
        ys = tuple(jets._broadcast(jets.primal(y), shape) for y in Y)
        DF = jets.stack([jets.derivative(y, p, shape) for y in Y], from_end=1)
        return pull_back_linear(a.field(ys), DF)

    return DifferentialForm(F.domain, a.degree, field, name=f"{F.name}*{a.name}", raw=True,
                            analytic=a.analytic)


def restrict_to_tangent(a: DifferentialForm, points, tangent_basis, normal=None,
                        tol: float = 1e-10) -> AlternatingFormValue:
    """Evaluate ambient ``a`` on spans of tangent vectors.

    ``tangent_basis`` is a list of k vectors (each ``(m,)`` or ``(N, m)``) or an
    array ``(N, m, k)``.  If ``normal`` (gradient of a defining function) is
    given, every basis vector must be orthogonal to it within ``tol``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(tangent_basis, np.ndarray) and tangent_basis.ndim == 3:
        B = tangent_basis
    else:
        B = np.stack(np.broadcast_arrays(*[np.asarray(v, float) for v in tangent_basis]), axis=-1)
        if B.ndim == 2:
            B = np.broadcast_to(B, (len(points),) + B.shape)
    if B.shape[-2] != a.chart.dim:
        raise ContractError("tangent vectors must live in the ambient dimension")
    gram = np.einsum("nmi,nmj->nij", B, B)
    if np.any(np.abs(np.linalg.det(gram)) < 1e-24):
        raise ContractError("tangent basis is not linearly independent")
    if normal is not None:
        nrm = np.asarray(normal, float)
        nrm = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
        dots = np.einsum("nm,nmk->nk", np.broadcast_to(nrm, points.shape), B)
        if np.max(np.abs(dots)) > tol:
            raise ContractError(f"basis not tangent: max normal component {np.max(np.abs(dots)):.3g}")
    return pull_back_linear(a.at(points), B)


def sphere_tangent_basis(points: np.ndarray) -> np.ndarray:
    """Orthonormal tangent frames of the round sphere at ``points``, ``(N, m, m-1)``.

    Project the standard basis onto the tangent space, drop the vector with the
    smallest residual (the one most aligned with the normal), orthonormalize.
    """
    x = np.atleast_2d(points)
    n = x / np.linalg.norm(x, axis=1, keepdims=True)
    N, m = n.shape
    proj = np.eye(m)[None] - n[:, :, None] * n[:, None, :]  # columns = projected e_j
    drop = np.argmax(np.abs(n), axis=1)
    keep = np.ones((N, m), dtype=bool)
    keep[np.arange(N), drop] = False
    cols = proj.transpose(0, 2, 1)[keep].reshape(N, m - 1, m).transpose(0, 2, 1)
    q, _ = np.linalg.qr(cols)
    return q


class EmbeddedSphere:
    """Unit sphere in an ambient chart, handled through ambient forms.

    The orientation is the ambient ``(m-1)``-form ``i_x(dx_1^...^dx_m)``, which
    restricts to the round volume with the outward-normal convention.
    """

    def __init__(self, name: str, ambient: Chart, accept: Callable | None = None):
        self.name = name
        self.chart = ambient
        self.dim = ambient.dim - 1
        self._accept = accept
        m = ambient.dim

        def vol(*x):
            terms = {}
            for i in range(m):
                key = tuple(j for j in range(m) if j != i)
                terms[key] = x[i] if i % 2 == 0 else -x[i]
            return AlternatingFormValue.from_terms(m, m - 1, terms)

        self.orientation = DifferentialForm(ambient, m - 1, vol, name=f"vol[{name}]")

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        ok = np.abs(np.sum(points * points, axis=1) - 1.0) <= 1e-12
        if self._accept is not None:
            ok &= np.asarray(self._accept(points), dtype=bool)
        return ok

    def sample(self, count: int, seed: int) -> np.ndarray:
        if count < 1:
            raise ContractError("sample count must be at least 1")
        rng = np.random.default_rng(seed)
        m = self.chart.dim

        def draw(r, n):
            g = r.standard_normal((n, m))
            return g / np.linalg.norm(g, axis=1, keepdims=True)

        accept = self._accept or (lambda p: np.ones(len(p), dtype=bool))
        return rejection_sample(rng, count, draw, accept)

    def restrict(self, form: DifferentialForm, points) -> AlternatingFormValue:
        points = np.atleast_2d(points)
        return restrict_to_tangent(form, points, sphere_tangent_basis(points), normal=points)

    def density(self, form: DifferentialForm, points) -> np.ndarray:
        if form.degree != self.dim:
            raise ContractError(f"density needs a degree-{self.dim} form")
        top = self.restrict(form, points).values()[..., 0]
        vol = self.restrict(self.orientation, points).values()[..., 0]
        if np.any(vol == 0):
            raise FormEvaluationError("sphere orientation vanishes")
        return top / vol


# --------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    fn: Callable
    name: str = ""

    def at(self, points) -> np.ndarray:
        coords = _coords_of(points)
        n = len(coords[0])
        comps = self.fn(*coords)
        out = np.stack([np.broadcast_to(np.asarray(c, float), (n,)) for c in comps], axis=-1)
        if not np.all(np.isfinite(out)):
            raise FormEvaluationError(f"non-finite component in {self.name}")
        return out


def pair(a: DifferentialForm, X: VectorField, points) -> np.ndarray:
    """``a(X)`` at the points, for a 1-form ``a``."""
    if a.degree != 1:
        raise ContractError("pairing needs a 1-form")
    if a.chart is not X.chart:
        raise ContractError(f"form on {a.chart.name} paired with field on {X.chart.name}")
    return np.sum(a.at(points).values() * X.at(points), axis=-1)


def sample(domain, count: int, seed: int) -> np.ndarray:
    return domain.sample(count, seed)
