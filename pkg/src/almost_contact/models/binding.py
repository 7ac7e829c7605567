"""Binding data ``(N, mu, nu, Omega)`` and the flat three-torus binding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import jets
from ..charts import Chart, DifferentialForm, VectorField, box_sampler, exterior_derivative
from ..exterior import ContractError

RESIDUAL_TOL = 1e-9
POSITIVITY_TOL = 1e-10


class ModelConstructionError(RuntimeError):
    """A model failed one of its defining invariants at construction."""


@dataclass(frozen=True)
class InvariantResult:
    name: str
    value: float
    passed: bool


@dataclass(frozen=True)
class BindingData:
    """Contact binding ``N^{2n-1}`` with a closed 1-form ``nu`` and a closed 2-form ``Omega``.

    ``epsilon`` is the calibration scale at which the transversality condition
    ``nu ^ (eps Omega + dmu)^{n-1} > 0`` is asserted.
    """

    chart: Chart
    mu: DifferentialForm
    nu: DifferentialForm
    Omega: DifferentialForm
    n: int
    epsilon: float
    params: dict = field(default_factory=dict)
    # closed forms of mu^Omega / vol_N and nu^Omega / vol_N, used as independent oracles
    oracle: dict | None = None

    @property
    def dmu(self) -> DifferentialForm:
        return exterior_derivative(self.mu)

    @property
    def volume(self) -> DifferentialForm:
        """``mu ^ (dmu)^{n-1}``, the binding volume form."""
        out = self.mu
        for _ in range(self.n - 1):
            out = out.wedge(self.dmu)
        return out

    def transversality_form(self, epsilon: float | None = None) -> DifferentialForm:
        eps = self.epsilon if epsilon is None else epsilon
        calibrated = self.Omega * eps + self.dmu
        out = self.nu
        for _ in range(self.n - 1):
            out = out.wedge(calibrated)
        return out

    def invariants(self, points: np.ndarray, epsilon: float | None = None) -> list:
        """Every binding invariant evaluated at ``points``."""
        ch = self.chart
        vol = ch.density(self.volume, points)
        nu_norm = np.abs(self.nu.at(points).values()).max(axis=-1)
        nu_dmu = self.nu
        for _ in range(self.n - 1):
            nu_dmu = nu_dmu.wedge(self.dmu)
        trans = ch.density(self.transversality_form(epsilon), points)
        res = [
            ("binding contact", float(vol.min()), vol.min() > POSITIVITY_TOL),
            ("nu closed", float(exterior_derivative(self.nu).at(points).max_abs().max()), None),
            ("nu nonvanishing", float(nu_norm.min()), nu_norm.min() > POSITIVITY_TOL),
            ("nu ^ dmu^(n-1) = 0", float(nu_dmu.at(points).max_abs().max()), None),
            ("Omega closed", float(exterior_derivative(self.Omega).at(points).max_abs().max()), None),
            ("transversality", float(trans.min()), trans.min() > POSITIVITY_TOL),
        ]
        return [InvariantResult(name, v, bool(v <= RESIDUAL_TOL) if ok is None else bool(ok))
                for name, v, ok in res]

    def check(self, points: np.ndarray, epsilon: float | None = None) -> None:
        for r in self.invariants(points, epsilon):
            if not r.passed:
                raise ModelConstructionError(f"binding invariant {r.name!r} failed: {r.value:.3g}")


def torus_chart() -> Chart:
    two_pi = 2 * np.pi
    return Chart(
        "T3", ("x", "y", "z"),
        box_sampler([0.0] * 3, [two_pi] * 3),
        contains=lambda p: np.all((p >= 0) & (p < two_pi), axis=1),
        orientation=lambda x, y, z: {"x^y^z": 1.0},
    )


def torus_binding(epsilon: float, omega_tilt: float = 0.0, check_samples: int = 200,
                  seed: int = 0) -> BindingData:
    """``T^3`` with ``mu = cos z dx - sin z dy``, ``nu = dz``, ``Omega = dx^dy + k dx^dz``.

    ``omega_tilt`` (``k``) adds a closed ``dx^dz`` component to ``Omega``; it is
    invisible to the transversality condition but bounds how large ``epsilon``
    may be before the calibrated form degenerates on the collar.
    """
    if not epsilon > 0:
        raise ContractError("epsilon must be positive")
    ch = torus_chart()
    k = float(omega_tilt)
    mu = ch.form(1, lambda x, y, z: {"x": jets.cos(z), "y": -1.0 * jets.sin(z)}, "mu")
    nu = ch.form(1, lambda x, y, z: {"z": 1.0}, "nu")
    Omega = ch.form(2, lambda x, y, z: {"x^y": 1.0, "x^z": k}, "Omega")
    b = BindingData(ch, mu, nu, Omega, n=2, epsilon=float(epsilon),
                    params={"epsilon": float(epsilon), "omega_tilt": k},
                    oracle={"mu_Omega": lambda x, y, z: k * np.sin(z),
                            "nu_Omega": lambda x, y, z: np.ones_like(z)})
    b.check(ch.sample(check_samples, seed))
    return b


def torus_reeb_field(binding: BindingData) -> VectorField:
    """Reeb field of ``mu`` on the torus: ``(cos z, -sin z, 0)``."""
    return VectorField(binding.chart,
                       lambda x, y, z: (np.cos(z), -np.sin(z), np.zeros_like(z)), "R_mu")
