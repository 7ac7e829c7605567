"""``S^4 x S^1`` with an integrable 1-form and a non-closed leafwise 2-form.

``S^4`` sits in ``R^5`` and is covered by two stereographic charts: ``north``
(projection from the south pole, valid for ``x5 >= -1/2`` in use) and ``south``
(projection from the north pole, ``x5 <= 1/2``).  Forms are written once on
``R^5 x R`` and pulled back to each chart.

``v0`` is the smooth expression ``x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3 + x5 ds``;
on ``S^4`` minus the poles it coincides with ``(1 - x5^2) pi^* lambda + x5 ds``
for the meridian projection ``pi`` onto ``S^3``.
"""

from __future__ import annotations

from dataclasses import dataclass

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
from ..exterior import AlternatingFormValue, ContractError
from ..profiles import Bump, shaped_bump
from .binding import ModelConstructionError

CHART_RADIUS_SQ = 3.0  # |q|^2 <= 3  <=>  x5 >= -1/2 on the north chart
OVERLAP_RHO = (1.0 / 3.0, 3.0)
INTEGRABILITY_TOL = 1e-8
AMBIENT = ("x1", "x2", "x3", "x4", "x5", "s")
CHART_COORDS = ("q1", "q2", "q3", "q4", "s")


def _stereographic(sign: float):
    """Inverse stereographic map; ``sign=+1`` puts ``q = 0`` at the north pole."""

    def fn(q1, q2, q3, q4, s):
        rho = q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4
        inv = jets.reciprocal(1.0 + rho)
        x5 = (1.0 - rho) * inv if sign > 0 else (rho - 1.0) * inv
        return (2.0 * q1 * inv, 2.0 * q2 * inv, 2.0 * q3 * inv, 2.0 * q4 * inv, x5, s)

    return fn


@dataclass
class ProductChart:
    name: str
    chart: Chart
    phi: SmoothMap
    theta0: DifferentialForm
    gamma: DifferentialForm
    v0: DifferentialForm
    omega: DifferentialForm
    lam_pullback: DifferentialForm
    v0_literal: DifferentialForm

    def x5(self, points) -> np.ndarray:
        return self.phi(points)[:, 4]

    def sample(self, count: int, seed: int) -> np.ndarray:
        return self.chart.sample(count, seed)

    def density(self, form: DifferentialForm, points) -> np.ndarray:
        return self.chart.density(form, points)

    def theta_t(self, t: float) -> DifferentialForm:
        return self.theta0 + self.v0 * t


@dataclass(frozen=True)
class ProductModel:
    bump: Bump
    ambient: Chart
    sphere3: Chart
    lam: DifferentialForm
    charts: dict

    def chart(self, name: str) -> ProductChart:
        return self.charts[name]

    @property
    def north_to_south(self) -> SmoothMap:
        n, s = self.charts["north"].chart, self.charts["south"].chart

        def fn(q1, q2, q3, q4, t):
            inv = jets.reciprocal(q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4)
            return (q1 * inv, q2 * inv, q3 * inv, q4 * inv, t)

        return SmoothMap(n, s, fn, "north->south")

    def overlap_samples(self, count: int, seed: int) -> np.ndarray:
        """North-chart points with ``1/3 <= |q|^2 <= 3``, i.e. ``|x5| <= 1/2``."""
        lo, hi = OVERLAP_RHO
        ok = lambda p: (np.sum(p[:, :4] ** 2, axis=1) >= lo) & (  # noqa: E731
            np.sum(p[:, :4] ** 2, axis=1) <= hi)
        r = np.sqrt(hi)
        draw = box_sampler([-r] * 4 + [0.0], [r] * 4 + [2 * np.pi])
        return rejection_sample(np.random.default_rng(seed), count, draw, ok)

    def overlap_residual(self, attr: str, points: np.ndarray) -> float:
        north = getattr(self.charts["north"], attr)
        south = getattr(self.charts["south"], attr)
        pulled = pullback(self.north_to_south, south).at(points).values()
        return float(np.max(np.abs(pulled - north.at(points).values())))

    def integrability_residual(self, points_by_chart: dict) -> float:
        worst = 0.0
        for name, pts in points_by_chart.items():
            c = self.charts[name]
            res = exterior_derivative(c.theta0) - c.theta0.wedge(c.gamma)
            worst = max(worst, float(res.at(pts).max_abs().max()))
        return worst

    def sample(self, count: int, seed: int) -> dict:
        """``count`` points split evenly over the two charts."""
        half = count // 2
        return {"north": self.charts["north"].sample(count - half, seed),
                "south": self.charts["south"].sample(half, seed + 1)}


def product_model(eps_bump: float = 0.1, check_samples: int = 200, seed: int = 0) -> ProductModel:
    if not 0 < eps_bump <= 0.2:
        raise ContractError("eps_bump must lie in (0, 0.2]")
    bump = shaped_bump(eps_bump)
    f, G = bump.f, bump.G

    ambient = Chart("R5xR", AMBIENT, lambda rng, n: rng.standard_normal((n, 6)))
    theta0 = ambient.form(1, lambda x1, x2, x3, x4, x5, s: {"x5": f(x5), "s": G(x5)}, "theta0")
    gamma = ambient.form(1, lambda x1, x2, x3, x4, x5, s: {"s": f(x5)}, "gamma")
    v0 = ambient.form(
        1,
        lambda x1, x2, x3, x4, x5, s: {"x2": x1, "x1": -1.0 * x2, "x4": x3, "x3": -1.0 * x4,
                                       "s": x5},
        "v0",
    )

    def sphere_volume(x1, x2, x3, x4, x5, s):
        # i_x(dx1^...^dx5) ^ ds
        xs = (x1, x2, x3, x4, x5)
        terms = {}
        for i in range(5):
            key = tuple(j for j in range(5) if j != i) + (5,)
            terms[key] = xs[i] if i % 2 == 0 else -1.0 * xs[i]
        return terms

    vol = ambient.form(5, sphere_volume, "vol[S4xS1]")

    sphere3 = Chart("R4", ("w1", "w2", "w3", "w4"), lambda rng, n: rng.standard_normal((n, 4)))
    lam = sphere3.form(
        1, lambda w1, w2, w3, w4: {"w2": w1, "w1": -1.0 * w2, "w4": w3, "w3": -1.0 * w4},
        "lambda",
    )

    charts = {}
    for name, sign in (("north", 1.0), ("south", -1.0)):
        holder: dict = {}
        r = np.sqrt(CHART_RADIUS_SQ)
        draw = box_sampler([-r] * 4 + [0.0], [r] * 4 + [2 * np.pi])

        def contains(p):
            return np.sum(p[:, :4] ** 2, axis=1) <= CHART_RADIUS_SQ

        def sampler(rng, n, draw=draw, contains=contains):
            return rejection_sample(rng, n, draw, contains)

        chart = Chart(f"S4xS1-{name}", CHART_COORDS, sampler, contains,
                      orientation=lambda *c, holder=holder: holder["vol"].field(c))
        phi = SmoothMap(chart, ambient, _stereographic(sign), f"phi-{name}")
        holder["vol"] = pullback(phi, vol)

        def meridian(q1, q2, q3, q4, s):
            inv = jets.reciprocal(jets.sqrt(q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4))
            return (q1 * inv, q2 * inv, q3 * inv, q4 * inv)

        pi = SmoothMap(chart, sphere3, meridian, f"pi-{name}")
        lam_pb = pullback(pi, lam)
        x5_of = _stereographic(sign)

        def v0_literal(*c, lam_pb=lam_pb, x5_of=x5_of, chart=chart):
            x5 = x5_of(*c)[4]
            return lam_pb.field(c) * (1.0 - x5 * x5) + chart.terms({"s": x5})

        th, ga, v = pullback(phi, theta0), pullback(phi, gamma), pullback(phi, v0)
        omega = exterior_derivative(v) + ga.wedge(v)
        charts[name] = ProductChart(
            name, chart, phi, th, ga, v, omega, lam_pb,
            chart.form(1, v0_literal, "v0-literal"),
        )

    model = ProductModel(bump, ambient, sphere3, lam, charts)
    res = model.integrability_residual(model.sample(check_samples, seed))
    if res > INTEGRABILITY_TOL:
        raise ModelConstructionError(
            f"d theta0 - theta0 ^ gamma residual {res:.3g} exceeds {INTEGRABILITY_TOL}"
        )
    return model
