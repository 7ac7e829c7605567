import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from almost_contact import jets
from almost_contact.charts import Chart, box_sampler
from almost_contact.exterior import basis

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def euclidean(dim: int, name: str = "") -> Chart:
    coords = tuple(f"x{i}" for i in range(dim))
    return Chart(name or f"R{dim}", coords, box_sampler([-1.0] * dim, [1.0] * dim))


def trig_form(chart: Chart, degree: int, seed: int, name: str = "w"):
    """Random smooth form: each coefficient is ``a sin(w.x + phi) + b``."""
    rng = np.random.default_rng(seed)
    idx = basis(chart.dim, degree)
    a, b = rng.normal(size=len(idx)), rng.normal(size=len(idx))
    w = rng.normal(size=(len(idx), chart.dim))
    phi = rng.uniform(0, 2 * np.pi, size=len(idx))

    def fn(*x):
        terms = {}
        for j, I in enumerate(idx):
            arg = phi[j]
            for i in range(chart.dim):
                arg = arg + w[j, i] * x[i]
            terms[I] = a[j] * jets.sin(arg) + b[j]
        return chart.terms(terms)

    return chart.form(degree, fn, name)


@pytest.fixture(scope="session")
def default_family():
    from almost_contact.deformations import DeformationFamily
    from almost_contact.models import collar, torus_binding
    from almost_contact.profiles import make_default_profiles

    return DeformationFamily(collar(torus_binding(0.1), make_default_profiles()), 0.1)
