"""The collar ``N x D^2`` of a binding, on a polar chart and an axial disk chart.

The polar chart ``(binding coords, r, theta)`` covers ``r_min <= r <= 1``.  The
disk chart ``(binding coords, u, v)`` with ``u + iv = r e^{i theta}`` covers
``r < AXIS_RADIUS``, where every profile is in its axial form and ``g dtheta``
is written as ``(g / r^2)(u dv - v du)``, smooth through the axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .. import jets
from ..charts import (
    Chart,
    DifferentialForm,
    SmoothMap,
    box_sampler,
    exterior_derivative,
    pullback,
    rejection_sample,
)
from ..exterior import AlternatingFormValue, ContractError, wedge
from ..profiles import AXIS_RADIUS, RadialFunction, TransitionProfile
from .binding import BindingData

R_MIN = 0.05
OVERLAP = (0.1, AXIS_RADIUS)


@lru_cache(maxsize=None)
def _pad(small: int, big: int, k: int) -> np.ndarray:
    # colex ranks of index tuples inside {0..small-1} do not depend on the ambient dimension
    return np.eye(comb(small, k), comb(big, k))


def lift(a: DifferentialForm, chart: Chart) -> DifferentialForm:
    """Pull a binding form back along the projection onto the leading coordinates."""
    m, M, k = a.chart.dim, chart.dim, a.degree
    if chart.coords[:m] != a.chart.coords:
        raise ContractError(f"{chart.name} does not start with the coordinates of {a.chart.name}")
    P = _pad(m, M, k)

    def field(coords):
        val = a.field(coords[:m])
        return AlternatingFormValue(M, k, jets.s_linear(val.coeffs, P))

    return DifferentialForm(chart, k, field, name=a.name, raw=True, analytic=a.analytic)


class CollarChart:
    """One chart of the collar together with the binding forms lifted onto it."""

    def __init__(self, kind: str, binding: BindingData, r_min: float = R_MIN):
        if kind not in ("polar", "disk"):
            raise ContractError(f"unknown collar chart {kind!r}")
        self.kind = kind
        m = binding.chart.dim
        two_pi = 2 * np.pi
        lows = [0.0] * m
        highs = [two_pi] * m
        if kind == "polar":
            coords = binding.chart.coords + ("r", "theta")
            draw = box_sampler(lows + [r_min, 0.0], highs + [1.0, two_pi])

            def sampler(rng, n):
                return draw(rng, n)

            def contains(p):
                return (p[:, m] >= r_min) & (p[:, m] <= 1.0)
        else:
            coords = binding.chart.coords + ("u", "v")
            a = AXIS_RADIUS
            draw = box_sampler(lows + [-a, -a], highs + [a, a])

            def contains(p):
                return p[:, m] ** 2 + p[:, m + 1] ** 2 < a * a

            def sampler(rng, n):
                return rejection_sample(rng, n, draw, contains)

        self.chart = Chart(f"collar-{kind}", coords, sampler, contains,
                           orientation=lambda *c: self._orientation(c))
        self.m = m
        self.mu = lift(binding.mu, self.chart)
        self.nu = lift(binding.nu, self.chart)
        self.Omega = lift(binding.Omega, self.chart)
        self.volume_N = lift(binding.volume, self.chart)

    def _orientation(self, coords):
        # binding volume ^ r dr ^ dtheta  (= du ^ dv on the disk)
        disk = {(self.m, self.m + 1): self.r(coords) if self.kind == "polar" else 1.0}
        return wedge(self.volume_N.field(coords),
                     AlternatingFormValue.from_terms(self.chart.dim, 2, disk))

    # radial building blocks -------------------------------------------------

    def r(self, coords):
        if self.kind == "polar":
            return coords[self.m]
        u, v = coords[self.m], coords[self.m + 1]
        return jets.sqrt(u * u + v * v)

    def rho(self, coords):
        """``r^2``, smooth on both charts."""
        if self.kind == "polar":
            return coords[self.m] * coords[self.m]
        u, v = coords[self.m], coords[self.m + 1]
        return u * u + v * v

    def radial(self, p: RadialFunction, coords):
        if self.kind == "polar":
            return p.radial(coords[self.m])
        if p.axial is None:
            raise ContractError(f"profile {p.name} has no axial form for the disk chart")
        return p.axial(self.rho(coords))

    def times_dtheta(self, p: RadialFunction, coords) -> AlternatingFormValue:
        """``p(r) dtheta``."""
        m = self.m
        if self.kind == "polar":
            return self.chart.terms({(m + 1,): p.radial(coords[m])})
        if p.axial_quotient is None:
            raise ContractError(f"profile {p.name} has no axial quotient for the disk chart")
        q = p.axial_quotient(self.rho(coords))
        u, v = coords[m], coords[m + 1]
        return self.chart.terms({(m,): -1.0 * (q * v), (m + 1,): q * u})

    def times_dr(self, p: RadialFunction, coords) -> AlternatingFormValue:
        """``p(r) dr``; on the disk chart only the identically-zero case is representable."""
        m = self.m
        if self.kind == "polar":
            return self.chart.terms({(m,): p.radial(coords[m])})
        val = self.radial(p, coords)
        if np.any(jets.base(val) != 0):
            raise ContractError(f"{p.name} dr is not smooth at the axis unless {p.name} vanishes there")
        return self.chart.zero(1)

    def sample(self, count: int, seed: int) -> np.ndarray:
        return self.chart.sample(count, seed)

    def density(self, form: DifferentialForm, points) -> np.ndarray:
        return self.chart.density(form, points)


@dataclass(frozen=True)
class CollarModel:
    binding: BindingData
    profile: TransitionProfile
    polar: CollarChart
    disk: CollarChart | None
    r_min: float

    def chart(self, kind: str = "polar") -> CollarChart:
        c = self.polar if kind == "polar" else self.disk
        if c is None:
            raise ContractError("this profile has no axial forms; the disk chart is unavailable")
        return c

    @property
    def n(self) -> int:
        return self.binding.n

    def alpha0(self, kind: str = "polar") -> DifferentialForm:
        """``f0(r) mu + g0(r) dtheta``."""
        c = self.chart(kind)
        p = self.profile
        return c.chart.form(
            1, lambda *x: c.mu.field(x) * c.radial(p.f0, x) + c.times_dtheta(p.g0, x),
            name="alpha0",
        )

    def omega_tilde(self, kind: str = "polar") -> DifferentialForm:
        """``Omega + e(r) dtheta ^ nu``."""
        c = self.chart(kind)
        e = self.profile.e
        return c.chart.form(
            2, lambda *x: c.Omega.field(x) + wedge(c.times_dtheta(e, x), c.nu.field(x)),
            name="Omega~",
        )

    def contact_volume(self, kind: str = "polar") -> DifferentialForm:
        a = self.alpha0(kind)
        return a.wedge(exterior_derivative(a).power(self.n))

    # overlap -----------------------------------------------------------------

    @property
    def polar_to_disk(self) -> SmoothMap:
        m = self.polar.m
        disk = self.chart("disk")

        def fn(*x):
            r, th = x[m], x[m + 1]
            return tuple(x[:m]) + (r * jets.cos(th), r * jets.sin(th))

        return SmoothMap(self.polar.chart, disk.chart, fn, "polar->disk")

    def overlap_samples(self, count: int, seed: int) -> np.ndarray:
        lo, hi = OVERLAP
        pts = self.polar.sample(count, seed)
        rng = np.random.default_rng(seed + 1)
        pts[:, self.polar.m] = lo + (hi - lo) * rng.random(count)
        return pts

    def overlap_residual(self, polar_form: DifferentialForm, disk_form: DifferentialForm,
                         points: np.ndarray) -> float:
        """Max coefficient gap between a polar form and the pullback of its disk twin."""
        pulled = pullback(self.polar_to_disk, disk_form).at(points).values()
        return float(np.max(np.abs(pulled - polar_form.at(points).values())))


def collar(binding: BindingData, profile: TransitionProfile, r_min: float = R_MIN) -> CollarModel:
    if not 0 < r_min < OVERLAP[0]:
        raise ContractError(f"r_min must lie in (0, {OVERLAP[0]})")
    polar = CollarChart("polar", binding, r_min)
    disk_ok = all(f.axial is not None for f in profile.functions().values())
    disk = CollarChart("disk", binding) if disk_ok else None
    return CollarModel(binding, profile, polar, disk, r_min)
