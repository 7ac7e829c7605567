"""Geometric predicates over sampled points, with pass/fail reports.

Every check returns a :class:`CheckReport`.  Positivity checks compare the
minimum of a top-degree form divided by the chart's orientation form against a
threshold; residual checks compare a max-norm against a tolerance.  Where the
same quantity has a closed form, the generic wedge pipeline is compared against
it as an independent oracle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import numpy as np

from .charts import DifferentialForm, exterior_derivative, pair
from .deformations import (
    TERM_NAMES,
    DeformationFamily,
    outer_alpha_t,
    outer_omega_t,
    tau,
)
from .exterior import AlternatingFormValue, ContractError, wedge, wedge_power
from .models.milnor import MilnorModel, cubic_modulus
from .models.product import ProductModel

POS_THRESHOLD = 1e-10
RES_TOL = 1e-8
RES_TOL_FD = 1e-5
ORACLE_RTOL = 1e-9
DECOMP_RTOL = 1e-10
NONNEG_TOL = 1e-10
LOCUS_TOL = 1e-9
REEB_TOL = 1e-6
# relative errors are taken against max(|a|, |b|, REL_FLOOR) so exact zeros compare cleanly
REL_FLOOR = 1e-12
# a positivity threshold must clear the in-situ d^2 = 0 noise by this factor
NOISE_FACTOR = 10.0


@dataclass
class CheckReport:
    check: str
    model: str
    params: dict
    min: float | None
    max: float | None
    argmin: dict | None
    residual: float | None
    verdict: str
    margin: float
    expected: str = "pass"
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def status(self) -> str:
        if self.expected == "pass":
            return "pass" if self.passed else "fail"
        return "unexpected-pass" if self.passed else "expected-fail"

    @property
    def as_expected(self) -> bool:
        return self.status in ("pass", "expected-fail")

    def expect(self, outcome: str) -> "CheckReport":
        self.expected = outcome
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        return d


@dataclass
class SweepResult:
    eps_max: float | None
    eps_fail: float | None  # smallest failing epsilon tested, if any
    trace: list  # (epsilon, passed) in the order tried
    grid: dict
    failed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _point(points, i, t=None) -> dict:
    out = {"point": [float(v) for v in np.atleast_2d(points)[i]]}
    if t is not None:
        out["t"] = float(t)
    return out


def positivity_report(check, values, points, threshold=POS_THRESHOLD, model="",
                      params=None, ts=None, detail=None) -> CheckReport:
    """``values`` has shape ``(N,)`` or ``(T, N)`` with ``ts`` the t-grid rows."""
    v = np.asarray(values, dtype=float)
    flat = v.reshape(-1)
    i = int(np.argmin(flat))  # first minimum wins: deterministic tie-break
    row, col = divmod(i, v.shape[-1]) if v.ndim == 2 else (None, i)
    lo, hi = float(flat[i]), float(flat.max())
    return CheckReport(
        check, model, dict(params or {}), lo, hi,
        _point(points, col, None if row is None else ts[row]),
        None, "pass" if lo > threshold else "fail", lo - threshold,
        detail=dict(detail or {}, threshold=threshold),
    )


def residual_report(check, residuals, points, tol=RES_TOL, model="", params=None,
                    ts=None, detail=None) -> CheckReport:
    r = np.asarray(residuals, dtype=float)
    flat = r.reshape(-1)
    i = int(np.argmax(flat))
    row, col = divmod(i, r.shape[-1]) if r.ndim == 2 else (None, i)
    worst = float(flat[i])
    return CheckReport(
        check, model, dict(params or {}), float(flat.min()), worst,
        _point(points, col, None if row is None else ts[row]),
        worst, "pass" if worst <= tol else "fail", tol - worst,
        detail=dict(detail or {}, tolerance=tol),
    )


def relative_error(a, b, floor: float = REL_FLOOR) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def _tol_for(form: DifferentialForm, tol: float | None) -> float:
    if tol is not None:
        return tol
    return RES_TOL if form.analytic else RES_TOL_FD


# --------------------------------------------------------------------------
# generic checks


def contact_check(alpha: DifferentialForm, n: int, domain, points, threshold=POS_THRESHOLD,
                  model="", params=None) -> CheckReport:
    """``alpha ^ (d alpha)^n`` against the orientation of ``domain``."""
    if alpha.degree != 1:
        raise ContractError("contact check needs a 1-form")
    if 2 * n + 1 != getattr(domain, "dim", alpha.chart.dim):
        raise ContractError(f"contact check with n={n} needs dimension {2 * n + 1}")
    top = alpha.wedge(exterior_derivative(alpha).power(n))
    return positivity_report(f"contact {alpha.name}", domain.density(top, points), points,
                             threshold, model, params)


def frobenius_residual(alpha: DifferentialForm, points, tol=None, model="",
                       params=None) -> CheckReport:
    """Max-norm of ``alpha ^ d alpha``."""
    if alpha.degree != 1:
        raise ContractError("Frobenius residual needs a 1-form")
    res = alpha.wedge(exterior_derivative(alpha)).at(points).max_abs()
    return residual_report(f"frobenius {alpha.name}", res, points, _tol_for(alpha, tol),
                           model, params)


def leafwise_symplectic_check(alpha: DifferentialForm, omega: DifferentialForm, n: int, domain,
                              points, threshold=POS_THRESHOLD, tol=None, model="",
                              params=None) -> CheckReport:
    """Both channels: ``alpha ^ omega^n > 0`` and ``alpha ^ d omega = 0``.

    The channel reports are kept in ``detail["channels"]``; :func:`channels`
    returns them as separate reports.
    """
    if alpha.degree != 1 or omega.degree != 2:
        raise ContractError("leafwise check needs a 1-form and a 2-form")
    pos = positivity_report(f"leafwise positivity {alpha.name}^{omega.name}^{n}",
                            domain.density(alpha.wedge(omega.power(n)), points), points,
                            threshold, model, params)
    res = residual_report(f"leafwise closedness {alpha.name}^d{omega.name}",
                          alpha.wedge(exterior_derivative(omega)).at(points).max_abs(), points,
                          _tol_for(omega, tol), model, params)
    ok = pos.passed and res.passed
    return CheckReport(
        f"leafwise symplectic {alpha.name},{omega.name}", model, dict(params or {}),
        pos.min, pos.max, pos.argmin, res.residual, "pass" if ok else "fail",
        min(pos.margin, res.margin),
        detail={"channels": [pos.to_dict(), res.to_dict()]},
    )


def channels(report: CheckReport) -> list:
    out = []
    for d in report.detail.get("channels", []):
        d = {k: v for k, v in d.items() if k != "status"}
        out.append(CheckReport(**d))
    return out


def noise_floor(form: DifferentialForm, points) -> float:
    """Max coefficient of ``d(d form)``: the pipeline's own roundoff level."""
    return float(exterior_derivative(exterior_derivative(form)).at(points).max_abs().max())


# --------------------------------------------------------------------------
# Milnor model


def reeb_statistics(model: MilnorModel, points) -> dict:
    v = pair(model.dtheta, model.reeb, points)
    return {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max()),
            "spread": float(v.max() - v.min()), "count": int(len(v))}


def off_binding(model: MilnorModel, points, seed: int = 0) -> np.ndarray:
    """Drop points within ``delta_N`` of the binding and top up from the page sampler."""
    points = np.atleast_2d(points)
    keep = points[cubic_modulus(points) > model.delta_N]
    missing = len(points) - len(keep)
    if missing:
        keep = np.concatenate([keep, model.pages.sample(missing, seed + len(points))])
    return keep


def adaptedness_check(model: MilnorModel, points, threshold=POS_THRESHOLD, sign: float = 1.0,
                      seed: int = 0, params=None) -> CheckReport:
    """``dtheta ^ (d alpha)^2 > 0`` off the binding, with ``dtheta(R)`` as certificate."""
    points = off_binding(model, points, seed)
    dens = model.sphere.density(model.adaptedness_volume(sign), points)
    stats = reeb_statistics(model, points)
    if sign < 0:
        stats = {k: (-v if k in ("mean", "min", "max") else v) for k, v in stats.items()}
    name = "adaptedness dtheta^dalpha^2" if sign > 0 else "adaptedness (-dtheta)^dalpha^2"
    return positivity_report(name, dens, points, threshold, "milnor", params,
                             detail={"reeb_pairing": stats})


def reeb_certificate(model: MilnorModel, points, expected: float = 3.0, tol=REEB_TOL,
                     seed: int = 0, params=None) -> CheckReport:
    points = off_binding(model, points, seed)
    v = pair(model.dtheta, model.reeb, points)
    rep = residual_report("dtheta(R) = 3", np.abs(v - expected), points, tol, "milnor", params,
                          detail={"reeb_pairing": reeb_statistics(model, points)})
    return rep


def outer_branch_checks(model: MilnorModel, t_grid, points, threshold=POS_THRESHOLD,
                        params=None) -> list:
    """Contact for ``t < 1``, non-contact at ``t = 1``, and ``alpha_t ^ omega_t^2 > 0`` throughout."""
    points = off_binding(model, points)
    ts = np.asarray(t_grid, float)
    contact, almost = [], []
    for t in ts:
        a = outer_alpha_t(model, t)
        contact.append(model.sphere.density(a.wedge(exterior_derivative(a).power(2)), points))
        almost.append(model.sphere.density(a.wedge(outer_omega_t(model, t).power(2)), points))
    contact, almost = np.array(contact), np.array(almost)
    open_rows = ts < 1.0
    out = [
        positivity_report("outer contact (t<1)", contact[open_rows], points, threshold,
                          "milnor", params, ts[open_rows]),
        positivity_report("outer contact (t=1)", contact[~open_rows], points, threshold,
                          "milnor", params, ts[~open_rows]).expect("fail"),
        positivity_report("outer alpha_t^omega_t^2", almost, points, threshold, "milnor",
                          params, ts),
    ]
    # closed form: tau^2 (8 tau + 24 (1 - tau)) and 8 tau + 24 (1 - tau)
    taus = np.array([tau(t) for t in ts])[:, None]
    ref_almost = 8 * taus + 24 * (1 - taus)
    # d(dtheta) is roundoff, not zero: it enters the contact density as
    # alpha_t ^ tau dalpha ^ d(dtheta), which is absorbed before taking the relative error
    dd = exterior_derivative(exterior_derivative(model.dtheta)).at(points).max_abs()
    amax = np.stack([outer_alpha_t(model, t).at(points).max_abs() for t in ts])
    leak = NOISE_FACTOR * 2.0 * taus * amax * dd[None, :]
    ref_contact = taus ** 2 * ref_almost
    excess = np.maximum(np.abs(contact - ref_contact) - leak, 0.0)
    err = np.maximum(excess / np.maximum(np.abs(ref_contact), REL_FLOOR),
                     relative_error(almost, ref_almost))
    out.append(residual_report("outer branch closed form", err, points, ORACLE_RTOL, "milnor",
                               params, ts))
    return out


# --------------------------------------------------------------------------
# collar: cached evaluation over (t, epsilon)


class CollarEvaluator:
    """Values of the collar family at fixed points, reused across ``t`` and ``epsilon``.

    ``d alpha_0``, ``Omega~`` and the orientation are evaluated once; the four
    terms of ``alpha_t`` once per ``t``.  ``omega_t`` is then assembled at the
    value level, which is exact because it is affine in ``t * epsilon``.
    """

    def __init__(self, family: DeformationFamily, points, kind: str = "polar"):
        self.family = family
        self.kind = kind
        self.points = np.atleast_2d(np.asarray(points, float))
        c = family.collar.chart(kind)
        self.cchart = c
        self.vol = c.chart.orientation.at(self.points).values()[..., 0]
        if np.any(self.vol == 0):
            raise ContractError("orientation vanishes at a sample")
        self.d0 = family.dalpha0(kind).at(self.points)
        self.wt = family.collar.omega_tilde(kind).at(self.points)
        self._terms: dict = {}

    @property
    def n(self) -> int:
        return self.family.n

    def terms(self, t: float) -> tuple:
        t = float(t)
        if t not in self._terms:
            dec = self.family.term_decomposition(t, self.kind)
            self._terms[t] = tuple(f.at(self.points) for f in dec.terms())
        return self._terms[t]

    def omega(self, t: float, eps: float) -> AlternatingFormValue:
        if t == 0:
            return self.d0
        return self.d0 + self.wt * (t * eps)

    def term_densities(self, t: float, eps: float) -> np.ndarray:
        wn = wedge_power(self.omega(t, eps), self.n)
        return np.stack([wedge(a, wn).values()[..., 0] / self.vol for a in self.terms(t)])

    def top_density(self, t: float, eps: float) -> np.ndarray:
        a, b, c, d = self.terms(t)
        wn = wedge_power(self.omega(t, eps), self.n)
        return wedge(a + b + c + d, wn).values()[..., 0] / self.vol


def _evaluator(family, points, kind, evaluator):
    if evaluator is not None:
        return evaluator
    return CollarEvaluator(family, points, kind)


def almost_contact_positivity(family: DeformationFamily, t_grid, points, kind="polar",
                              threshold=POS_THRESHOLD, epsilon=None, evaluator=None,
                              params=None) -> CheckReport:
    ev = _evaluator(family, points, kind, evaluator)
    eps = family.epsilon if epsilon is None else epsilon
    ts = np.asarray(t_grid, float)
    vals = np.stack([ev.top_density(t, eps) for t in ts])
    p = dict(params or {}, epsilon=eps, chart=kind)
    return positivity_report(f"almost contact alpha_t^omega_t^2 [{kind}]", vals, ev.points, threshold,
                             "torus-collar", p, ts)


def _oracle_binding_factors(family: DeformationFamily, points, kind):
    """Closed-form ``mu^Omega / vol_N`` and ``nu^Omega / vol_N`` of the binding."""
    oracle = family.collar.binding.oracle
    if oracle is None:
        raise ContractError("binding has no closed-form oracle factors")
    m = family.collar.binding.chart.dim
    coords = tuple(np.atleast_2d(points)[:, i] for i in range(m))
    n = len(coords[0])
    return (np.broadcast_to(oracle["mu_Omega"](*coords), (n,)),
            np.broadcast_to(oracle["nu_Omega"](*coords), (n,)))


def radial_values(family: DeformationFamily, t: float, points, kind="polar") -> dict:
    """Profile values and derivatives at the points' radii."""
    c = family.collar.chart(kind)
    pts = np.atleast_2d(points)
    m = c.m
    r = pts[:, m] if kind == "polar" else np.hypot(pts[:, m], pts[:, m + 1])
    p = family.collar.profile
    out = {"r": r}
    for k, fn in p.functions().items():
        out[k], out[k + "'"] = fn.value(r), fn.deriv(r)
    out["f_t"] = (1 - t) * out["f0"] + t * out["f1"]
    out["g_t"] = (1 - t) * out["g0"] + t * out["g1"]
    out["f_t'"] = (1 - t) * out["f0'"] + t * out["f1'"]
    out["g_t'"] = (1 - t) * out["g0'"] + t * out["g1'"]
    return out


def term_oracles(family: DeformationFamily, t: float, points, kind="polar",
                  epsilon=None) -> np.ndarray:
    """Closed-form densities of the four terms of ``alpha_t ^ omega_t^2`` (``n = 2``).

    With ``S = f0 + t eps (mu^Omega/vol_N)`` and ``P = t eps (nu^Omega/vol_N)``::

        term_mu    = 2 (1-t) f_t g0' S / r
        term_nu    = 2 t f_t h g0' P / r
        term_theta = -2 g_t f0' S / r
        term_dr    = 2 t^2 eps e^2 P / r
    """
    if family.n != 2:
        raise ContractError("closed-form term oracles are implemented for n = 2")
    eps = family.epsilon if epsilon is None else epsilon
    v = radial_values(family, t, points, kind)
    muO, nuO = _oracle_binding_factors(family, points, kind)
    S = v["f0"] + t * eps * muO
    P = t * eps * nuO
    r = v["r"]
    return np.stack([
        2 * (1 - t) * v["f_t"] * v["g0'"] * S / r,
        2 * t * v["f_t"] * v["h"] * v["g0'"] * P / r,
        -2 * v["g_t"] * v["f0'"] * S / r,
        2 * t * t * eps * v["e"] ** 2 * P / r,
    ])


def term_factors(family: DeformationFamily, t: float, points, kind="polar") -> np.ndarray:
    """Scalar factors whose vanishing is the equality case of each term."""
    v = radial_values(family, t, points, kind)
    r = v["r"]
    return np.stack([
        (1 - t) * v["f_t"] * v["g0'"] / r,
        t * v["f_t"] * v["h"] * v["g0'"] / r,
        v["g_t"] / r,
        t * v["e"],
    ])


def contact_oracle(family: DeformationFamily, t: float, points, kind="polar") -> np.ndarray:
    """``n (1-t)^n f_t^{n-1} (g_t' f_t - f_t' g_t) / r``."""
    n = family.n
    v = radial_values(family, t, points, kind)
    return (n * (1 - t) ** n * v["f_t"] ** (n - 1)
            * (v["g_t'"] * v["f_t"] - v["f_t'"] * v["g_t"]) / v["r"])


def term_checks(family: DeformationFamily, t_grid, points, kind="polar", epsilon=None,
                      evaluator=None, oracle: bool = True, params=None) -> list:
    """Non-negativity, closed-form agreement and equality locus for each term."""
    ev = _evaluator(family, points, kind, evaluator)
    eps = family.epsilon if epsilon is None else epsilon
    ts = np.asarray(t_grid, float)
    dens = np.stack([ev.term_densities(t, eps) for t in ts], axis=1)  # (4, T, N)
    p = dict(params or {}, epsilon=eps, chart=kind)
    reports = []
    if oracle:
        ref = np.stack([term_oracles(family, t, ev.points, kind, eps) for t in ts], axis=1)
    factors = np.stack([term_factors(family, t, ev.points, kind) for t in ts], axis=1)
    for j, name in enumerate(TERM_NAMES):
        d = dens[j]
        rep = positivity_report(f"{name} >= 0", d, ev.points, -NONNEG_TOL,
                                "torus-collar", p, ts)
        ok = rep.min >= -NONNEG_TOL
        locus = factors[j] == 0.0
        locus_max = float(np.abs(d[locus]).max()) if locus.any() else 0.0
        off = np.abs(factors[j]) > 1e-6
        off_min = float(d[off].min()) if off.any() else None
        # off the locus the term is a higher power of the factor, so only strict sign is asserted
        locus_ok = locus_max <= LOCUS_TOL and (off_min is None or off_min > 0.0)
        detail = {
            "nonnegative": ok,
            "equality_locus": {"points": int(locus.sum()), "max_abs_term": locus_max,
                               "min_off_locus": off_min, "ok": locus_ok},
        }
        ok = ok and locus_ok
        if oracle:
            err = float(relative_error(d, ref[j]).max())
            detail["oracle_relative_error"] = err
            ok = ok and err <= ORACLE_RTOL
            rep.residual = err
        rep.verdict = "pass" if ok else "fail"
        rep.check = f"{name} [{kind}]"
        rep.detail.update(detail)
        reports.append(rep)
    return reports


def decomposition_check(family: DeformationFamily, t_grid, points, kind="polar", epsilon=None,
                        evaluator=None, params=None) -> CheckReport:
    """The four term densities sum to ``alpha_t ^ omega_t^2``.

    The total is computed from ``alpha_t`` as assembled by the family, not from
    the cached terms.
    """
    ev = _evaluator(family, points, kind, evaluator)
    eps = family.epsilon if epsilon is None else epsilon
    ts = np.asarray(t_grid, float)
    fam = family.with_epsilon(eps)
    dom = family.collar.chart(kind)
    err = []
    for t in ts:
        total = dom.density(fam.top(t, kind), ev.points)
        err.append(relative_error(ev.term_densities(t, eps).sum(axis=0), total))
    return residual_report("terms sum to alpha_t^omega_t^2", np.array(err), ev.points,
                           DECOMP_RTOL, "torus-collar", dict(params or {}, epsilon=eps), ts)


def contact_oracle_check(family: DeformationFamily, t_grid, points, kind="polar",
                         params=None) -> CheckReport:
    dom = family.collar.chart(kind)
    ts = np.asarray(t_grid, float)
    err = [relative_error(dom.density(family.contact_top(t, kind), points),
                          contact_oracle(family, t, points, kind)) for t in ts]
    return residual_report("contact scalar closed form", np.array(err), points, ORACLE_RTOL,
                           "torus-collar", params, ts)


def equality_loci_cover_check(family: DeformationFamily, points, t_grid=None, kind="polar",
                              epsilon=None, threshold=POS_THRESHOLD, evaluator=None,
                              params=None) -> CheckReport:
    """At every (t, point) some term of ``alpha_t ^ omega_t^2`` is positive."""
    ts = np.linspace(0, 1, 101) if t_grid is None else np.asarray(t_grid, float)
    ev = _evaluator(family, points, kind, evaluator)
    eps = family.epsilon if epsilon is None else epsilon
    best = np.stack([ev.term_densities(t, eps).max(axis=0) for t in ts])
    return positivity_report(f"equality loci do not cover [{kind}]", best, ev.points, threshold,
                             "torus-collar", dict(params or {}, epsilon=eps, chart=kind), ts)


def probe_points(family: DeformationFamily, r: float, count: int, seed: int) -> np.ndarray:
    """Polar-chart samples moved onto the circle of radius ``r``."""
    pts = family.collar.polar.sample(count, seed)
    pts[:, family.collar.polar.m] = r
    return pts


def transversality_holds(family: DeformationFamily, eps: float, points_N) -> bool:
    b = family.collar.binding
    vals = b.chart.density(b.transversality_form(eps), points_N)
    return bool(vals.min() > POS_THRESHOLD)


def epsilon_sweep(family: DeformationFamily, t_grid, points, eps_hi: float, kind="polar",
                  iterations: int = 12, binding_points=None, seed: int = 0) -> SweepResult:
    """Largest passing epsilon in ``(0, eps_hi]`` by bisection.

    The tested predicate is the conjunction of the binding transversality
    condition, positivity of ``alpha_t ^ omega_t^2`` and non-negativity of
    every term over the t-grid and points.
    """
    if not eps_hi > 0:
        raise ContractError("eps_hi must be positive")
    ev = CollarEvaluator(family, points, kind)
    ts = np.asarray(t_grid, float)
    bpts = family.collar.binding.chart.sample(1000, seed) if binding_points is None \
        else binding_points
    trace: list = []

    def ok(eps: float) -> bool:
        passed = transversality_holds(family, eps, bpts)
        for t in ts:
            if not passed:
                break
            terms = ev.term_densities(t, eps)
            passed = terms.min() >= -NONNEG_TOL and ev.top_density(t, eps).min() > POS_THRESHOLD
        trace.append((float(eps), bool(passed)))
        return passed

    grid = {"t_points": int(len(ts)), "samples": int(len(ev.points)), "chart": kind,
            "eps_hi": float(eps_hi), "iterations": iterations}
    if ok(eps_hi):
        lo, hi = eps_hi, None
    else:
        lo, hi = 0.0, eps_hi
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    if lo == 0.0:
        return SweepResult(None, hi, trace, grid, failed=True)
    for frac in (0.5, 0.25):
        ok(lo * frac)
    return SweepResult(lo, hi, trace, grid)


def sweep_monotone(result: SweepResult) -> bool:
    """Every tested epsilon below a passing one also passes."""
    passing = [e for e, p in result.trace if p]
    if not passing:
        return True
    top = max(passing)
    return all(p for e, p in result.trace if e <= top)


def sweep_report(result: SweepResult, params=None) -> CheckReport:
    ok = not result.failed and sweep_monotone(result)
    return CheckReport(
        "epsilon sweep", "torus-collar", dict(params or {}), result.eps_max, result.eps_fail,
        None, None, "pass" if ok else "fail",
        0.0 if result.eps_max is None else result.eps_max,
        detail={"trace": result.trace, "grid": result.grid, "monotone": sweep_monotone(result)},
    )


# --------------------------------------------------------------------------
# product model


def product_integrability(model: ProductModel, pts: dict, tol=RES_TOL, params=None) -> CheckReport:
    res, where = [], []
    for name, p in pts.items():
        c = model.chart(name)
        diff = exterior_derivative(c.theta0) - c.theta0.wedge(c.gamma)
        res.append(diff.at(p).max_abs())
        where.append(p)
    return residual_report("d theta0 = theta0 ^ gamma", np.concatenate(res),
                           np.concatenate(where), tol, "product", params)


def _over_charts(model: ProductModel, pts: dict, fn) -> tuple:
    vals, where = [], []
    for name, p in pts.items():
        vals.append(fn(model.chart(name), p))
        where.append(p)
    return np.concatenate(vals), np.concatenate(where)


def theta_scaling(model: ProductModel, pts: dict, t: float) -> float:
    """Max relative gap between ``theta_t ^ (d theta_t)^2`` and ``t^2 theta0 ^ omega^2``."""
    def err(c, p):
        th = c.theta_t(t)
        lhs = c.density(th.wedge(exterior_derivative(th).power(2)), p)
        lead = t * t * c.density(c.theta0.wedge(c.omega.power(2)), p)
        return np.abs(lhs - lead) / np.abs(lead)

    vals, _ = _over_charts(model, pts, err)
    return float(vals.max())


def product_checks(model: ProductModel, pts: dict, t_small: float = 0.01,
                   threshold=POS_THRESHOLD, params=None) -> list:
    out = [product_integrability(model, pts, params=params)]
    res, where = _over_charts(
        model, pts, lambda c, p: c.theta0.wedge(exterior_derivative(c.theta0)).at(p).max_abs())
    out.append(residual_report("frobenius theta0", res, where, RES_TOL, "product", params))
    vals, where = _over_charts(
        model, pts, lambda c, p: c.density(c.theta0.wedge(c.omega.power(2)), p))
    out.append(positivity_report("leafwise positivity theta0^omega^2", vals, where, threshold,
                                 "product", params))
    res, where = _over_charts(
        model, pts, lambda c, p: c.theta0.wedge(exterior_derivative(c.omega)).at(p).max_abs())
    out.append(residual_report("leafwise closedness theta0^d omega", res, where, RES_TOL,
                               "product", params).expect("fail"))
    vals, where = _over_charts(
        model, pts,
        lambda c, p: c.density(c.theta_t(t_small).wedge(
            exterior_derivative(c.theta_t(t_small)).power(2)), p))
    out.append(positivity_report(f"contact theta_t (t={t_small:g})", vals, where, threshold,
                                 "product", dict(params or {}, t=t_small)))
    e1, e2 = theta_scaling(model, pts, t_small), theta_scaling(model, pts, t_small / 2)
    ratio = e1 / e2
    out.append(CheckReport(
        "theta_t t^2 scaling ratio", "product", dict(params or {}, t=t_small), e2, e1, None,
        abs(ratio - 2.0), "pass" if abs(ratio - 2.0) <= 0.1 else "fail", 0.1 - abs(ratio - 2.0),
        detail={"relative_error_t": e1, "relative_error_t/2": e2, "ratio": ratio},
    ))
    return out


def product_overlap_checks(model: ProductModel, points, tol=RES_TOL, params=None) -> CheckReport:
    res = {a: model.overlap_residual(a, points) for a in ("theta0", "gamma", "v0", "omega")}
    worst = max(res.values())
    return CheckReport("chart overlap north/south", "product", dict(params or {}), None, worst,
                       None, worst, "pass" if worst <= tol else "fail", tol - worst,
                       detail={"per_form": res, "tolerance": tol})


def collar_overlap_check(family: DeformationFamily, points, t: float = 0.5, tol=RES_TOL,
                         params=None) -> CheckReport:
    col = family.collar
    pairs = {
        "alpha0": (col.alpha0("polar"), col.alpha0("disk")),
        f"alpha_{t:g}": (family.alpha_t(t, "polar"), family.alpha_t(t, "disk")),
        f"omega_{t:g}": (family.omega_t(t, "polar"), family.omega_t(t, "disk")),
        "Omega~": (col.omega_tilde("polar"), col.omega_tilde("disk")),
    }
    res = {k: col.overlap_residual(a, b, points) for k, (a, b) in pairs.items()}
    worst = max(res.values())
    return CheckReport("chart overlap polar/disk", "torus-collar", dict(params or {}), None,
                       worst, None, worst, "pass" if worst <= tol else "fail", tol - worst,
                       detail={"per_form": res, "tolerance": tol})


def binding_reports(family: DeformationFamily, points_N, epsilon=None, params=None) -> list:
    out = []
    for r in family.collar.binding.invariants(points_N, epsilon):
        out.append(CheckReport(f"binding {r.name}", "torus-collar", dict(params or {}), r.value,
                               r.value, None, None, "pass" if r.passed else "fail", 0.0))
    return out
