import numpy as np
import pytest
from conftest import euclidean, trig_form
from hypothesis import given
from hypothesis import strategies as st

from almost_contact import jets
from almost_contact.charts import (
    Chart,
    EmbeddedSphere,
    FormEvaluationError,
    SamplingError,
    SmoothMap,
    VectorField,
    box_sampler,
    exterior_derivative,
    pair,
    pullback,
    rejection_sample,
    restrict_to_tangent,
    sphere_tangent_basis,
)
from almost_contact.exterior import ContractError

seeds = st.integers(0, 2**32 - 1)


@st.composite
def chart_degree(draw, max_dim=5):
    dim = draw(st.integers(2, max_dim))
    return euclidean(dim), draw(st.integers(0, dim - 1)), draw(seeds)


@given(chart_degree())
def test_d_squared_vanishes_analytically(case):
    chart, k, seed = case
    w = trig_form(chart, k, seed)
    pts = chart.sample(50, seed % 1000)
    assert exterior_derivative(exterior_derivative(w)).at(pts).max_abs().max() <= 1e-9


@given(chart_degree(4))
def test_leibniz(case):
    chart, p, seed = case
    q = min(1, chart.dim - p - 1)
    a, b = trig_form(chart, p, seed, "a"), trig_form(chart, q, seed + 1, "b")
    pts = chart.sample(40, seed % 1000)
    lhs = exterior_derivative(a.wedge(b))
    rhs = exterior_derivative(a).wedge(b) + a.wedge(exterior_derivative(b)) * (-1.0) ** p
    assert (lhs - rhs).at(pts).max_abs().max() <= 1e-8


def _twist(src: Chart, dst: Chart):
    # smooth map R^m -> R^n built from sines so its Jacobian is nontrivial
    def fn(*x):
        out = []
        for j in range(dst.dim):
            out.append(jets.sin(x[j % src.dim] + 0.3 * j) + 0.5 * x[(j + 1) % src.dim] * x[j % src.dim])
        return tuple(out)

    return SmoothMap(src, dst, fn, "twist")


@given(st.integers(2, 4), st.integers(2, 4), seeds)
def test_pullback_naturality(m, n, seed):
    src, dst = euclidean(m, "src"), euclidean(n, "dst")
    k = seed % min(m, n)
    w = trig_form(dst, k, seed)
    F = _twist(src, dst)
    pts = src.sample(40, seed % 1000)
    lhs = exterior_derivative(pullback(F, w)).at(pts).values()
    rhs = pullback(F, exterior_derivative(w)).at(pts).values()
    assert np.abs(lhs - rhs).max() <= 1e-8


@given(seeds)
def test_pullback_respects_wedge(seed):
    src, dst = euclidean(3, "src"), euclidean(3, "dst")
    a, b = trig_form(dst, 1, seed), trig_form(dst, 1, seed + 7)
    F = _twist(src, dst)
    pts = src.sample(30, seed % 1000)
    lhs = pullback(F, a.wedge(b)).at(pts).values()
    rhs = pullback(F, a).wedge(pullback(F, b)).at(pts).values()
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_finite_difference_forms_agree_with_analytic():
    chart = euclidean(3)
    w = trig_form(chart, 1, 11)
    fd = chart.form(1, lambda *x: w.field(x), "fd", analytic=False)
    pts = chart.sample(30, 0)
    gap = (exterior_derivative(w) - exterior_derivative(fd)).at(pts).max_abs().max()
    assert gap <= 1e-5


def test_exact_derivative_of_polynomial_form():
    chart = euclidean(3)
    w = chart.form(1, lambda x0, x1, x2: {"x0": x1 * x2, "x1": x0 * x0}, "w")
    dw = exterior_derivative(w).at(np.array([[1.0, 2.0, 3.0]]))
    # d(x1 x2 dx0 + x0^2 dx1) = (2 x0 - x2) dx0^dx1 - x1 dx0^dx2
    assert dw.component((0, 1))[0] == pytest.approx(-1.0)
    assert dw.component((0, 2))[0] == pytest.approx(-2.0)
    assert dw.component((1, 2))[0] == pytest.approx(0.0)


def test_sampling_is_seeded_and_inside():
    chart = Chart("disk", ("u", "v"), lambda rng, n: rejection_sample(
        rng, n, box_sampler([-1, -1], [1, 1]), lambda p: (p ** 2).sum(axis=1) < 1),
        contains=lambda p: (p ** 2).sum(axis=1) < 1)
    a, b = chart.sample(100, 3), chart.sample(100, 3)
    np.testing.assert_array_equal(a, b)
    assert chart.contains(a).all()
    assert not np.array_equal(a, chart.sample(100, 4))


def test_rejection_sampling_gives_up():
    with pytest.raises(SamplingError):
        rejection_sample(np.random.default_rng(0), 10, box_sampler([0], [1]),
                         lambda p: p[:, 0] > 2, max_rounds=3)


def test_non_finite_coefficients_raise():
    chart = euclidean(2)
    w = chart.form(1, lambda x0, x1: {"x0": jets.reciprocal(x1)}, "bad")
    with np.errstate(divide="ignore"), pytest.raises(FormEvaluationError):
        w.at(np.array([[0.0, 0.0]]))


def test_form_degree_contract():
    chart = euclidean(2)
    w = chart.form(2, lambda x0, x1: {"x0": x1}, "wrong")
    with pytest.raises(ContractError):
        w.at(np.zeros((1, 2)))


def test_sphere_tangent_frames_are_orthonormal_and_tangent():
    pts = EmbeddedSphere("S3", euclidean(4)).sample(50, 0)
    B = sphere_tangent_basis(pts)
    gram = np.einsum("nmi,nmj->nij", B, B)
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-12)
    assert np.abs(np.einsum("nm,nmk->nk", pts, B)).max() < 1e-12


def test_restriction_rejects_normal_vectors():
    chart = euclidean(3)
    w = trig_form(chart, 1, 2)
    p = np.array([[0.0, 0.0, 1.0]])
    with pytest.raises(ContractError):
        restrict_to_tangent(w, p, [np.array([0.0, 0.0, 1.0])], normal=p)


def test_sphere_density_of_area_form():
    # i_x(dx^dy^dz) restricted to S^2 is the oriented area form: density 1
    ambient = euclidean(3)
    S = EmbeddedSphere("S2", ambient)
    area = ambient.form(2, lambda x, y, z: {"x1^x2": x, "x0^x2": -1.0 * y, "x0^x1": z}, "area")
    pts = S.sample(100, 1)
    np.testing.assert_allclose(S.density(area, pts), 1.0, atol=1e-12)


def test_pairing_with_vector_field():
    chart = euclidean(2)
    w = chart.form(1, lambda x0, x1: {"x0": x1, "x1": 2.0}, "w")
    X = VectorField(chart, lambda x0, x1: (np.ones_like(x0), x0), "X")
    pts = np.array([[1.0, 3.0], [2.0, -1.0]])
    np.testing.assert_allclose(pair(w, X, pts), [3.0 + 2.0, -1.0 + 4.0])
