"""Radial transition functions for the collar and the bump of the S^4 x S^1 example.

All profiles are built from the non-analytic mollifier ``psi(u) = exp(-1/u)``
so their plateaus are exact: outside a transition interval they return the
plateau constant itself, with zero derivatives.  Every function accepts plain
arrays or jets.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np
from scipy import integrate

from . import jets
from .exterior import ContractError

AXIS_RADIUS = 0.2  # the Cartesian disk chart covers r < AXIS_RADIUS
GRID_POINTS = 10_000
# strict derivative signs are asserted away from this fraction of an open
# interval's ends; closer in, exp(-1/u) underflows and only weak signs are decidable
GUARD_FRACTION = 0.01


def psi(u):
    """``exp(-1/u)`` for ``u > 0``, exactly 0 otherwise."""
    b = jets.base(u)
    pos = b > 0
    safe = jets.where(pos, u, 1.0)
    return jets.where(pos, jets.exp(-1.0 * jets.reciprocal(safe)), 0.0)


class SmoothStep:
    """C-infinity step: 0 on (-inf, a], 1 on [b, inf), increasing in between.

    On the transition this is ``psi(u) / (psi(u) + psi(1-u))``, evaluated as the
    logistic function of ``1/(1-u) - 1/u`` so that the derivative is a product
    of nonnegative factors and never picks up a rounding-induced wrong sign.
    """

    def __init__(self, a: float, b: float):
        if not a < b:
            raise ContractError(f"smooth_step needs a < b, got ({a}, {b})")
        self.a, self.b = float(a), float(b)

    def __call__(self, x):
        u = (x - self.a) / (self.b - self.a)
        b = jets.base(u)
        inside = (b > 0) & (b < 1)
        safe = jets.where(inside, u, 0.5)
        with np.errstate(over="ignore"):  # subnormal u: 1/u -> inf, logistic saturates
            z = jets.reciprocal(1.0 - safe) - jets.reciprocal(safe)
        return jets.where(inside, jets.logistic(z), np.where(b >= 1, 1.0, 0.0))

    def __repr__(self) -> str:
        return f"SmoothStep({self.a}, {self.b})"


def smooth_step(a: float, b: float) -> SmoothStep:
    return SmoothStep(a, b)


def derivative(fn: Callable, x) -> np.ndarray:
    """First derivative of a jet-capable scalar function at plain points."""
    x = np.asarray(x, dtype=float)
    out = fn(jets.Jet(x, np.ones(x.shape + (1,))))
    return np.broadcast_to(jets.derivative(out, 1, x.shape)[..., 0], x.shape).copy()


def value(fn: Callable, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(np.asarray(jets.base(fn(x)), float), x.shape).copy()


@dataclass(frozen=True)
class RadialFunction:
    """A profile ``p(r)`` plus, optionally, its form near the axis.

    ``axial(rho)`` gives ``p`` as a function of ``rho = r^2`` on
    ``r < AXIS_RADIUS``; ``axial_quotient(rho)`` gives ``p(r)/r^2`` there.
    The Cartesian disk chart needs these to stay smooth through ``r = 0``.
    """

    name: str
    radial: Callable
    axial: Callable | None = None
    axial_quotient: Callable | None = None

    def __call__(self, r):
        return self.radial(r)

    def value(self, r) -> np.ndarray:
        return value(self.radial, r)

    def deriv(self, r) -> np.ndarray:
        return derivative(self.radial, r)


def _const(c):
    return lambda rho: c


@dataclass(frozen=True)
class ProfileParams:
    """The knobs of the default profile family (defaults satisfy every profile constraint)."""

    e_amplitude: float = 1.0
    e_support: tuple = (0.4, 0.6)
    f0_curvature: float = 0.5
    g0_blend: tuple = (0.8, 0.95)
    f1_drop: tuple = (0.25, 0.5)
    g1_rise: tuple = (0.5, 0.75)
    h_drop: tuple = (0.75, 0.9)

    def to_dict(self) -> dict:
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v
                for f in fields(self)}


@dataclass(frozen=True)
class TransitionProfile:
    f0: RadialFunction
    g0: RadialFunction
    f1: RadialFunction
    g1: RadialFunction
    h: RadialFunction
    e: RadialFunction
    e_amplitude: float
    params: ProfileParams | None = None

    def functions(self) -> dict:
        return {k: getattr(self, k) for k in ("f0", "g0", "f1", "g1", "h", "e")}


def build_profiles(params: ProfileParams) -> TransitionProfile:
    """Profiles from parameters; no constraint checking (see :func:`validate_profiles`)."""
    c = float(params.f0_curvature)
    s_g0 = smooth_step(*params.g0_blend)
    s_f1 = smooth_step(*params.f1_drop)
    s_g1 = smooth_step(*params.g1_rise)
    s_h = smooth_step(*params.h_drop)
    lo, hi = params.e_support
    if not lo < 0.5 < hi:
        raise ContractError("e must be built around r = 1/2")
    up, down = smooth_step(lo, 0.5), smooth_step(0.5, hi)
    amp = float(params.e_amplitude)

    def g0(r):
        s = s_g0(r)
        return (1.0 - s) * (r * r) + s

    def e(r):
        return amp * (up(r) * (1.0 - down(r)))

    axis_ok = AXIS_RADIUS <= min(params.g0_blend[0], params.f1_drop[0], params.g1_rise[0],
                                 params.h_drop[0], lo)
    return TransitionProfile(
        f0=RadialFunction("f0", lambda r: 1.0 - c * (r * r), lambda rho: 1.0 - c * rho),
        g0=RadialFunction("g0", g0, (lambda rho: rho) if axis_ok else None,
                          _const(1.0) if axis_ok else None),
        f1=RadialFunction("f1", lambda r: 1.0 - s_f1(r), _const(1.0) if axis_ok else None),
        g1=RadialFunction("g1", s_g1, _const(0.0) if axis_ok else None,
                          _const(0.0) if axis_ok else None),
        h=RadialFunction("h", lambda r: 1.0 - s_h(r), _const(1.0) if axis_ok else None),
        e=RadialFunction("e", e, _const(0.0) if axis_ok else None,
                         _const(0.0) if axis_ok else None),
        e_amplitude=amp,
        params=params,
    )


def make_default_profiles(e_amplitude: float = 1.0) -> TransitionProfile:
    if e_amplitude == 0:
        raise ContractError("e(1/2) must be non-zero")
    return build_profiles(ProfileParams(e_amplitude=e_amplitude))


# --------------------------------------------------------------------------
# validation


@dataclass
class ConstraintResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ProfileReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> ConstraintResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self) -> list:
        return [r.name for r in self.results if not r.passed]


def _open(grid, a, b, guard: bool = False):
    if guard:
        w = (b - a) * GUARD_FRACTION
        a, b = a + w, b - w
    return grid[(grid > a) & (grid < b)]


def _closed(grid, a, b):
    pts = grid[(grid >= a) & (grid <= b)]
    return np.unique(np.concatenate([pts, [a, b]]))


def validate_profiles(p: TransitionProfile, n: int = GRID_POINTS) -> ProfileReport:
    """Check every profile constraint on an ``n``-point grid plus plateau endpoints.

    Margins are signed distances from the threshold; plateau margins are minus
    the largest deviation (0 means the identity holds exactly).
    """
    grid = np.linspace(0.0, 1.0, n)
    rep = ProfileReport()

    def add(name, margin, strict=True, detail=""):
        margin = float(margin)
        rep.results.append(ConstraintResult(name, margin > 0 if strict else margin >= 0,
                                            margin, detail))

    def plateau(name, fn, a, b, target):
        pts = _closed(grid, a, b)
        dev = np.max(np.abs(fn.value(pts) - (target(pts) if callable(target) else target)))
        add(name, -dev, strict=False, detail=f"on [{a}, {b}]")

    def sign(name, fn, a, b, s):
        strict_pts = _open(grid, a, b, guard=True)
        weak_pts = _open(grid, a, b)
        d_strict = s * fn.deriv(strict_pts)
        d_weak = s * fn.deriv(weak_pts)
        margin = d_strict.min() if d_weak.min() >= 0 else d_weak.min()
        add(name, margin, detail=f"sign {'+' if s > 0 else '-'} on ({a}, {b})")

    pos = grid[grid > 0]
    add("f0 > 0 on [0,1]", p.f0.value(grid).min())
    add("f0' < 0 on (0,1]", -p.f0.deriv(pos).max())
    add("g0 weakly increasing", p.g0.deriv(grid).min(), strict=False)
    plateau("g0 = r^2 on [0,1/2]", p.g0, 0.0, 0.5, lambda r: r * r)
    plateau("g0 = 1 near r=1", p.g0, 0.95, 1.0, 1.0)
    plateau("f1 = 1 on [0,1/4]", p.f1, 0.0, 0.25, 1.0)
    plateau("f1 = 0 on [1/2,1]", p.f1, 0.5, 1.0, 0.0)
    sign("f1' < 0 on (1/4,1/2)", p.f1, 0.25, 0.5, -1)
    plateau("g1 = 1 on [3/4,1]", p.g1, 0.75, 1.0, 1.0)
    plateau("g1 = 0 on [0,1/2]", p.g1, 0.0, 0.5, 0.0)
    sign("g1' > 0 on (1/2,3/4)", p.g1, 0.5, 0.75, +1)
    plateau("h = 1 on [0,3/4]", p.h, 0.0, 0.75, 1.0)
    plateau("h = 0 near r=1", p.h, 0.95, 1.0, 0.0)
    outside = np.concatenate([_closed(grid, 0.0, 0.4), _closed(grid, 0.6, 1.0)])
    add("e supported in [0.4,0.6]", -np.max(np.abs(p.e.value(outside))), strict=False)
    add("e(1/2) != 0", abs(float(p.e.value(0.5))))
    add("contact quantity > 0 on (0,1]", contact_quantity(p, pos).min())
    near0 = contact_quantity(p, np.array([1e-6]))[0]
    f00 = float(p.f0.value(0.0))
    add("contact quantity -> 2 f0(0)", 1e-6 - abs(near0 - 2 * f00), detail=f"{near0} vs {2 * f00}")
    return rep


def contact_quantity(p: TransitionProfile, r, t: float = 0.0) -> np.ndarray:
    """``(g_t' f_t - f_t' g_t) / r`` for the interpolated profiles."""
    r = np.asarray(r, dtype=float)
    ft = (1 - t) * p.f0.value(r) + t * p.f1.value(r)
    gt = (1 - t) * p.g0.value(r) + t * p.g1.value(r)
    dft = (1 - t) * p.f0.deriv(r) + t * p.f1.deriv(r)
    dgt = (1 - t) * p.g0.deriv(r) + t * p.g1.deriv(r)
    return (dgt * ft - dft * gt) / r


def interpolant_contact_margin(p: TransitionProfile, r_grid, t_grid) -> float:
    """Minimum of the contact quantity over an (r, t) grid with r > 0 and t < 1."""
    return min(float(contact_quantity(p, r_grid, t).min()) for t in t_grid)


# --------------------------------------------------------------------------
# config files


def save_profile_params(params: ProfileParams, path) -> None:
    cp = configparser.ConfigParser()
    cp["profile"] = {
        k: " ".join(repr(float(x)) for x in v) if isinstance(v, list) else repr(float(v))
        for k, v in params.to_dict().items()
    }
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def parse_profile_section(section: dict) -> ProfileParams:
    """Parameters from string key-values; unknown keys raise ``KeyError``."""
    defaults = ProfileParams()
    known = {f.name for f in fields(ProfileParams)}
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise KeyError(f"unknown profile key {key!r}")
        vals = [float(x) for x in str(raw).replace(",", " ").split()]
        if isinstance(getattr(defaults, key), tuple):
            if len(vals) != 2:
                raise ValueError(f"{key} needs two numbers")
            kwargs[key] = tuple(vals)
        else:
            if len(vals) != 1:
                raise ValueError(f"{key} needs one number")
            kwargs[key] = vals[0]
    return replace(defaults, **kwargs)


def load_profile_params(path) -> ProfileParams:
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    return parse_profile_section(dict(cp["profile"]) if cp.has_section("profile") else {})


# --------------------------------------------------------------------------
# bump of the S^4 x S^1 example


@dataclass(frozen=True)
class Bump:
    """Even bump ``f`` on ``[-eps, eps]`` with ``int f^2 = 2`` and ``G' = f^2``, ``G(0) = 0``."""

    eps: float
    amplitude: float
    f: Callable
    G: Callable
    square_integral: float


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def shaped_bump(eps: float) -> Bump:
    if not 0 < eps < 1:
        raise ContractError("bump support must satisfy 0 < eps < 1")
    eps = float(eps)

    def shape_sq(u):
        return np.where(np.abs(u) < 1, np.exp(-2.0 / np.where(np.abs(u) < 1, 1 - u * u, 1.0)), 0.0)

    I, _ = integrate.quad(shape_sq, -1.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    amp = float(np.sqrt(2.0 / (eps * I)))

    def f(x):
        u = x * (1.0 / eps)
        b = jets.base(u)
        inside = np.abs(b) < 1
        one_minus = jets.where(inside, 1.0 - u * u, 1.0)
        return jets.where(inside, amp * jets.exp(-1.0 * jets.reciprocal(one_minus)), 0.0)

    def G_plain(x):
        x = np.asarray(x, dtype=float)
        c = np.clip(x, -eps, eps)
        # int_0^c f^2 by Gauss-Legendre on [0, c]
        nodes = 0.5 * c[..., None] * (_GL_NODES + 1.0)
        fx = np.asarray(f(nodes))
        return 0.5 * c * np.sum(_GL_WEIGHTS * fx * fx, axis=-1)

    def G(x):
        if jets.is_jet(x):
            return jets.Jet(G(x.val), jets.insert_axis(f(x.val) * f(x.val)) * x.grad)
        return G_plain(x)

    total, _ = integrate.quad(lambda x: float(f(np.array(x))) ** 2, -eps, eps,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    return Bump(eps, amp, f, G, total)
