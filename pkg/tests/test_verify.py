import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from test_deformations import POLY, SYMBOLIC

from almost_contact import verify as V
from almost_contact.deformations import DeformationFamily
from almost_contact.exterior import ContractError
from almost_contact.models import collar, milnor_model, product_model, torus_binding
from almost_contact.profiles import ProfileParams, build_profiles, make_default_profiles


@pytest.fixture(scope="module")
def fam():
    return DeformationFamily(collar(torus_binding(0.1), make_default_profiles()), 0.1)


@pytest.fixture(scope="module")
def pts(fam):
    return fam.collar.polar.sample(1500, 1)


@pytest.fixture(scope="module")
def milnor():
    return milnor_model()


# reports -------------------------------------------------------------------


def test_report_status_matrix():
    r = V.CheckReport("c", "m", {}, 1.0, 1.0, None, None, "pass", 1.0)
    assert (r.status, r.as_expected) == ("pass", True)
    r.expect("fail")
    assert (r.status, r.as_expected) == ("unexpected-pass", False)
    r.verdict = "fail"
    assert (r.status, r.as_expected) == ("expected-fail", True)
    r.expect("pass")
    assert (r.status, r.as_expected) == ("fail", False)
    json.dumps(r.to_dict())


def test_positivity_report_locates_minimum_on_grid():
    vals = np.array([[3.0, 2.0], [1.0, 0.5]])
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    r = V.positivity_report("p", vals, pts, threshold=0.0, ts=[0.1, 0.9])
    assert r.min == 0.5 and r.max == 3.0
    assert r.argmin == {"point": [1.0, 1.0], "t": 0.9}
    assert r.passed and r.margin == 0.5


def test_positivity_threshold_is_strict():
    r = V.positivity_report("p", np.array([1e-10]), np.zeros((1, 1)), threshold=1e-10)
    assert not r.passed


def test_residual_report():
    r = V.residual_report("r", np.array([1e-9, 3e-8]), np.zeros((2, 1)), tol=1e-8)
    assert r.residual == 3e-8 and not r.passed


def test_relative_error_floor():
    assert V.relative_error(0.0, 0.0) == 0.0
    assert V.relative_error(1e-20, 0.0) == pytest.approx(1e-8)
    assert V.relative_error(2.0, 1.0) == pytest.approx(0.5)


# generic predicates -----------------------------------------------------------


def test_contact_check_dimension_contract(milnor):
    with pytest.raises(ContractError):
        V.contact_check(milnor.alpha, 3, milnor.sphere, milnor.sphere.sample(5, 0))


def test_contact_and_frobenius(fam, pts):
    assert V.contact_check(fam.alpha_t(0.5), 2, fam.collar.polar, pts).passed
    assert not V.contact_check(fam.alpha_t(1.0), 2, fam.collar.polar, pts).passed
    assert V.frobenius_residual(fam.alpha_t(1.0), pts).passed
    assert not V.frobenius_residual(fam.alpha_t(0.9), pts).passed


def test_leafwise_channels(fam, pts):
    rep = V.leafwise_symplectic_check(fam.alpha_t(1.0), fam.omega_t(1.0), 2, fam.collar.polar, pts)
    pos, res = V.channels(rep)
    assert rep.passed and pos.passed and res.passed
    assert pos.min == rep.min and res.residual == rep.residual


def test_noise_floor_is_far_below_threshold(fam, pts):
    assert V.NOISE_FACTOR * V.noise_floor(fam.collar.alpha0(), pts) < V.POS_THRESHOLD


# closed-form oracles ------------------------------------------------------------


@pytest.mark.parametrize("case,want", SYMBOLIC)
def test_term_oracles_match_symbolic(case, want):
    t, eps, k, pt = case
    fam = DeformationFamily(collar(torus_binding(eps, k), POLY), eps)
    p = np.array([pt])
    np.testing.assert_allclose(V.term_oracles(fam, t, p)[:, 0], want[2], rtol=1e-12, atol=1e-15)
    assert V.contact_oracle(fam, t, p)[0] == pytest.approx(want[0], rel=1e-12, abs=1e-14)


def test_term_checks_pass(fam, pts):
    ts = np.linspace(0, 1, 11)
    reps = V.term_checks(fam, ts, pts)
    assert [r.check for r in reps] == [f"{n} [polar]" for n in
                                       ("term_mu", "term_nu", "term_theta", "term_dr")]
    assert all(r.passed for r in reps), [r.detail for r in reps]
    assert all(r.residual <= V.ORACLE_RTOL for r in reps)


def test_term_checks_on_disk(fam):
    disk = fam.collar.chart("disk").sample(300, 2)
    reps = V.term_checks(fam, np.linspace(0, 1, 6), disk, "disk")
    assert all(r.passed for r in reps)


def test_decomposition_and_contact_oracle(fam, pts):
    ts = np.linspace(0, 1, 6)
    assert V.decomposition_check(fam, ts, pts[:300]).residual <= V.DECOMP_RTOL
    assert V.contact_oracle_check(fam, ts, pts[:300]).residual <= V.ORACLE_RTOL


def test_oracle_needs_binding_factors(fam, pts):
    b = fam.collar.binding
    from dataclasses import replace

    bare = DeformationFamily(collar(replace(b, oracle=None), fam.collar.profile), 0.1)
    with pytest.raises(ContractError):
        V.term_oracles(bare, 0.5, pts[:3])


@given(st.floats(0, 1), st.floats(0.06, 1.0), st.floats(0.0, 0.4), st.floats(0.0, 2 * np.pi))
def test_terms_nonnegative_for_untilted_binding(t, r, eps, z):
    fam = _FAM.with_epsilon(eps)
    p = np.array([[0.1, 0.2, z, r, 1.0]])
    dens = V.CollarEvaluator(fam, p).term_densities(t, eps)
    assert dens.min() >= -V.NONNEG_TOL


# equality loci -----------------------------------------------------------------------


def test_cover_passes_with_default_e(fam):
    probes = V.probe_points(fam, 0.5, 100, 3)
    assert np.all(probes[:, 3] == 0.5)
    assert V.equality_loci_cover_check(fam, probes, [0.0, 0.5, 1.0]).passed


def test_cover_fails_with_e_zero_at_half():
    fam = DeformationFamily(
        collar(torus_binding(0.1), build_profiles(ProfileParams(e_amplitude=0.0))), 0.1)
    rep = V.equality_loci_cover_check(fam, V.probe_points(fam, 0.5, 50, 4), [1.0])
    assert not rep.passed
    assert rep.max == pytest.approx(0.0, abs=1e-15)
    assert rep.argmin["t"] == 1.0


# sweep -------------------------------------------------------------------------------


def test_sweep_without_tilt_accepts_eps_hi(fam, pts):
    res = V.epsilon_sweep(fam, np.linspace(0, 1, 11), pts[:500], 3.0)
    assert res.eps_max == 3.0 and not res.failed and V.sweep_monotone(res)


def test_sweep_with_tilt_brackets_analytic_bound():
    k = 0.3
    fam = DeformationFamily(collar(torus_binding(0.1, k), make_default_profiles()), 0.1)
    p = fam.collar.polar.sample(2000, 5)
    res = V.epsilon_sweep(fam, np.linspace(0, 1, 21), p, 4.0)
    # S = f0 + t eps k sin z >= 1/2 - eps k can only fail beyond 1/(2k); every term dies at 1/k
    assert 0.5 / k <= res.eps_max < 1.0 / k
    assert V.sweep_monotone(res) and V.sweep_report(res).passed
    assert not any(p for e, p in res.trace if e >= 1.05 * res.eps_max)


def test_sweep_failure_is_reported(fam, pts):
    res = V.epsilon_sweep(fam, np.linspace(0, 1, 5), pts[:200], 1e-9, iterations=3)
    assert res.failed and res.eps_max is None
    assert not V.sweep_report(res).passed


def test_sweep_rejects_bad_bound(fam, pts):
    with pytest.raises(ContractError):
        V.epsilon_sweep(fam, [0.0], pts[:10], 0.0)


def test_sweep_monotone_detects_gaps():
    res = V.SweepResult(1.0, None, [(1.0, True), (0.5, False)], {})
    assert not V.sweep_monotone(res)


# overlaps and binding ---------------------------------------------------------------


def test_collar_overlap_and_binding_reports(fam):
    assert V.collar_overlap_check(fam, fam.collar.overlap_samples(300, 6)).passed
    reps = V.binding_reports(fam, fam.collar.binding.chart.sample(300, 7))
    assert len(reps) == 6 and all(r.passed for r in reps)


# milnor -------------------------------------------------------------------------------


def test_milnor_certificates(milnor):
    pts = milnor.sphere.sample(1000, 8)
    assert V.reeb_certificate(milnor, pts).passed
    assert V.adaptedness_check(milnor, pts).passed
    flipped = V.adaptedness_check(milnor, pts, sign=-1.0)
    assert not flipped.passed and flipped.detail["reeb_pairing"]["mean"] == pytest.approx(-3.0)


def test_off_binding_refills(milnor):
    pts = milnor.sphere.sample(500, 9)
    kept = V.off_binding(milnor, pts)
    assert len(kept) == 500
    from almost_contact.models.milnor import cubic_modulus

    assert cubic_modulus(kept).min() > milnor.delta_N


def test_outer_branch(milnor):
    reps = V.outer_branch_checks(milnor, np.linspace(0, 1, 21), milnor.pages.sample(300, 10))
    assert [r.status for r in reps] == ["pass", "expected-fail", "pass", "pass"]


# product --------------------------------------------------------------------------------


def test_product_suite():
    P = product_model()
    reps = V.product_checks(P, P.sample(2000, 11))
    assert [r.status for r in reps] == ["pass"] * 3 + ["expected-fail"] + ["pass"] * 2
    ratio = reps[-1].detail["ratio"]
    assert abs(ratio - 2.0) <= 0.1
    assert V.product_overlap_checks(P, P.overlap_samples(200, 12)).passed


def _setup():
    return DeformationFamily(collar(torus_binding(0.1), make_default_profiles()), 0.1)


_FAM = _setup()
