"""One-parameter families ``t -> (alpha_t, omega_t)`` and the linear perturbation ``theta_t``.

On the collar::

    alpha_t = (1-t) f_t mu + t f_t h nu + g_t dtheta + t e dr
    omega_t = d alpha_0 + t eps (Omega + e dtheta ^ nu)

with ``f_t = (1-t) f0 + t f1`` and ``g_t = (1-t) g0 + t g1``.  Away from the
collar the family is ``tau alpha_0 + (1-tau) dtheta`` with ``tau = (1-t)^2``
and ``omega_t = d alpha_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .charts import DifferentialForm, exterior_derivative
from .exterior import ContractError
from .models.collar import CollarModel
from .models.milnor import MilnorModel
from .models.product import ProductModel
from .profiles import RadialFunction

TERM_NAMES = ("term_mu", "term_nu", "term_theta", "term_dr")


def tau(t: float) -> float:
    return (1.0 - t) ** 2


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ContractError(f"t must lie in [0, 1], got {t}")
    return t


def _opt(fn, *parts):
    return None if any(p is None for p in parts) else fn


def affine(a: RadialFunction, b: RadialFunction, t: float, name: str) -> RadialFunction:
    """``(1-t) a + t b``, keeping the axial forms when both have them."""
    s = 1.0 - t
    return RadialFunction(
        name,
        lambda r: s * a.radial(r) + t * b.radial(r),
        _opt(lambda rho: s * a.axial(rho) + t * b.axial(rho), a.axial, b.axial),
        _opt(lambda rho: s * a.axial_quotient(rho) + t * b.axial_quotient(rho),
             a.axial_quotient, b.axial_quotient),
    )


def product(a: RadialFunction, b: RadialFunction, name: str) -> RadialFunction:
    return RadialFunction(
        name,
        lambda r: a.radial(r) * b.radial(r),
        _opt(lambda rho: a.axial(rho) * b.axial(rho), a.axial, b.axial),
    )


@dataclass(frozen=True)
class TermDecomposition:
    term_mu: DifferentialForm
    term_nu: DifferentialForm
    term_theta: DifferentialForm
    term_dr: DifferentialForm

    def terms(self) -> tuple:
        return tuple(getattr(self, k) for k in TERM_NAMES)

    def total(self) -> DifferentialForm:
        a, b, c, d = self.terms()
        return a + b + c + d


@dataclass(frozen=True)
class DeformationFamily:
    collar: CollarModel
    epsilon: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ContractError("epsilon must be non-negative")

    @property
    def n(self) -> int:
        return self.collar.n

    def with_epsilon(self, epsilon: float) -> "DeformationFamily":
        return replace(self, epsilon=float(epsilon))

    def f_t(self, t: float) -> RadialFunction:
        p = self.collar.profile
        return affine(p.f0, p.f1, _check_t(t), "f_t")

    def g_t(self, t: float) -> RadialFunction:
        p = self.collar.profile
        return affine(p.g0, p.g1, _check_t(t), "g_t")

    def term_decomposition(self, t: float, kind: str = "polar") -> TermDecomposition:
        t = _check_t(t)
        c = self.collar.chart(kind)
        p = self.collar.profile
        ft, gt = self.f_t(t), self.g_t(t)
        fth = product(ft, p.h, "f_t h")
        form = c.chart.form
        return TermDecomposition(
            form(1, lambda *x: c.mu.field(x) * ((1.0 - t) * c.radial(ft, x)), "term_mu"),
            form(1, lambda *x: c.nu.field(x) * (t * c.radial(fth, x)), "term_nu"),
            form(1, lambda *x: c.times_dtheta(gt, x), "term_theta"),
            form(1, lambda *x: c.times_dr(p.e, x) * t, "term_dr"),
        )

    def alpha_t(self, t: float, kind: str = "polar") -> DifferentialForm:
        t = _check_t(t)
        if t == 0.0:
            return self.collar.alpha0(kind)
        terms = self.term_decomposition(t, kind)
        fields = [f.field for f in terms.terms()]

        def fn(*x):
            a, b, c, d = (f(x) for f in fields)
            return a + b + c + d

        return self.collar.chart(kind).chart.form(1, fn, f"alpha_{t:g}")

    def dalpha0(self, kind: str = "polar") -> DifferentialForm:
        return exterior_derivative(self.collar.alpha0(kind))

    def omega_t(self, t: float, kind: str = "polar") -> DifferentialForm:
        t = _check_t(t)
        d0 = self.dalpha0(kind)
        if t == 0.0:
            return d0
        w = self.collar.omega_tilde(kind)
        s = t * self.epsilon
        return d0.chart.form(2, lambda *x: d0.field(x) + w.field(x) * s, f"omega_{t:g}")

    def top(self, t: float, kind: str = "polar") -> DifferentialForm:
        """``alpha_t ^ omega_t^n``."""
        w = self.omega_t(t, kind)
        return self.alpha_t(t, kind).wedge(w.power(self.n))

    def term_tops(self, t: float, kind: str = "polar") -> tuple:
        """Each term of ``alpha_t`` wedged with ``omega_t^n``."""
        wn = self.omega_t(t, kind).power(self.n)
        return tuple(term.wedge(wn) for term in self.term_decomposition(t, kind).terms())

    def contact_top(self, t: float, kind: str = "polar") -> DifferentialForm:
        """``alpha_t ^ (d alpha_t)^n``."""
        a = self.alpha_t(t, kind)
        return a.wedge(exterior_derivative(a).power(self.n))


# --------------------------------------------------------------------------
# outer branch and linear perturbation


def outer_alpha_t(model: MilnorModel, t: float) -> DifferentialForm:
    return model.outer_alpha(tau(_check_t(t)))


def outer_omega_t(model: MilnorModel, t: float) -> DifferentialForm:
    _check_t(t)
    return model.dalpha


def theta_t_linear(model: ProductModel, t: float) -> dict:
    """``theta0 + t v0`` on each chart of the product model."""
    if t < 0:
        raise ContractError("t must be non-negative")
    return {name: c.theta_t(float(t)) for name, c in model.charts.items()}

