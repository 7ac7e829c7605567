"""The unit sphere ``S^5`` in ``C^3`` with its standard contact form and the
open book given by the argument of ``X^3 + Y^3 + Z^3``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import jets
from ..charts import Chart, DifferentialForm, EmbeddedSphere, VectorField, exterior_derivative
from ..exterior import ContractError

COORDS = ("x1", "y1", "x2", "y2", "x3", "y3")


def cubic(*c):
    """Real and imaginary parts of ``sum_j Z_j^3`` with ``Z_j = x_j + i y_j``."""
    re = im = 0.0
    for x, y in zip(c[0::2], c[1::2]):
        re = re + x * x * x - 3.0 * (x * y * y)
        im = im + 3.0 * (x * x * y) - y * y * y
    return re, im


def cubic_modulus(points: np.ndarray) -> np.ndarray:
    re, im = cubic(*np.atleast_2d(points).T)
    return np.hypot(re, im)


@dataclass(frozen=True)
class MilnorModel:
    ambient: Chart
    sphere: EmbeddedSphere
    pages: EmbeddedSphere  # sphere minus a neighbourhood of the binding
    alpha: DifferentialForm
    dtheta: DifferentialForm
    reeb: VectorField
    delta_N: float

    @property
    def dalpha(self) -> DifferentialForm:
        return exterior_derivative(self.alpha)

    def contact_volume(self) -> DifferentialForm:
        return self.alpha.wedge(self.dalpha.power(2))

    def adaptedness_volume(self, sign: float = 1.0) -> DifferentialForm:
        return (self.dtheta * sign).wedge(self.dalpha.power(2))

    def outer_alpha(self, tau: float) -> DifferentialForm:
        """``tau alpha + (1 - tau) dtheta``."""
        return self.alpha * tau + self.dtheta * (1.0 - tau)


def milnor_model(delta_N: float = 0.05) -> MilnorModel:
    if not 0 < delta_N < 0.5:
        raise ContractError("delta_N must lie in (0, 0.5)")
    ambient = Chart("C3", COORDS, lambda rng, n: rng.standard_normal((n, 6)),
                    orientation=lambda *c: {"x1^y1^x2^y2^x3^y3": 1.0})

    def alpha(*c):
        terms = {}
        for j in range(3):
            x, y = c[2 * j], c[2 * j + 1]
            terms[(2 * j + 1,)] = x
            terms[(2 * j,)] = -1.0 * y
        return terms

    def dtheta(*c):
        # dtheta = Im(df / f), df = sum 3 Z_j^2 (dx_j + i dy_j)
        A, B = cubic(*c)
        inv = jets.reciprocal(A * A + B * B)
        terms = {}
        for j in range(3):
            x, y = c[2 * j], c[2 * j + 1]
            a, b = 3.0 * (x * x - y * y), 6.0 * (x * y)
            terms[(2 * j,)] = (b * A - a * B) * inv
            terms[(2 * j + 1,)] = (a * A + b * B) * inv
        return terms

    def reeb(*c):
        out = []
        for x, y in zip(c[0::2], c[1::2]):
            out += [-y, x]
        return tuple(out)

    off_binding = lambda p: cubic_modulus(p) > delta_N  # noqa: E731
    return MilnorModel(
        ambient=ambient,
        sphere=EmbeddedSphere("S5", ambient),
        pages=EmbeddedSphere("S5-minus-N", ambient, accept=off_binding),
        alpha=ambient.form(1, alpha, "alpha_std"),
        dtheta=ambient.form(1, dtheta, "dtheta"),
        reeb=VectorField(ambient, reeb, "R_std"),
        delta_N=float(delta_N),
    )
