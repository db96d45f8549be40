import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_iv_data
from drml_iv.errors import InputError
from drml_iv.influence import (
    chi_if_point,
    compute_pseudo_outcomes,
    delta_dot_point,
    gamma_dot_point,
    strata_dot_point,
)
from drml_iv.nuisance import NuisancePredictions
from drml_iv.simulation import ScenarioSpec, generate_dataset, oracle_nuisance, reference_late

probs = st.floats(0.01, 0.99)


def test_gamma_dot_examples():
    assert gamma_dot_point(1, 1, 0.4, 0.6, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert gamma_dot_point(0, 0, 0.4, 0.6, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_delta_dot_examples():
    assert delta_dot_point(1, 1, 0.2, 0.8, 0.5) == pytest.approx(1.0, abs=1e-15)
    assert delta_dot_point(0, 0, 0.2, 0.8, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_strata_dot_example():
    at, nt = strata_dot_point(0, 0, 0.2, 0.8, 0.5)
    assert at == pytest.approx(-0.2, abs=1e-15)
    assert nt == pytest.approx(0.2, abs=1e-15)
    assert strata_dot_point(0.3, 0, 0.3, 0.9, 0.4)[0] == pytest.approx(0.3, abs=1e-15)


@given(probs, probs, probs, st.integers(0, 1), st.integers(0, 1))
def test_zero_residual_gives_plug_in(mu0, mu1, pi1, z, _):
    y = mu1 if z else mu0
    assert gamma_dot_point(y, z, mu0, mu1, pi1) == pytest.approx(mu1 - mu0, abs=1e-12)


@given(st.integers(0, 1), st.integers(0, 1), probs, probs, probs)
def test_strata_identity(a, z, lam0, lam1, pi1):
    d = delta_dot_point(a, z, lam0, lam1, pi1)
    at, nt = strata_dot_point(a, z, lam0, lam1, pi1)
    assert d + at + nt == pytest.approx(1.0, abs=1e-12)


def test_chi_if_examples():
    assert chi_if_point(1.2, 1.0, 0.04, 0.5) == pytest.approx(2.32, abs=1e-12)
    assert chi_if_point(1.2, 1.0, 0.0, 0.5) == pytest.approx(2.4, abs=1e-12)
    with pytest.raises(InputError):
        chi_if_point(1.0, 1.0, 0.1, 0.0)


def test_pi_out_of_range():
    with pytest.raises(InputError):
        gamma_dot_point(1, 1, 0, 1, 1.0)
    with pytest.raises(InputError):
        strata_dot_point(1, 1, 0, 1, 0.0)


def _random_preds(rng, n):
    return NuisancePredictions(rng.uniform(0.05, 0.95, n), rng.normal(size=n), rng.normal(size=n),
                               rng.random(n), rng.random(n))


def test_rowwise_matches_pointwise(rng):
    data = random_iv_data(rng, n=1)
    preds = _random_preds(rng, 1)
    po = compute_pseudo_outcomes(data, preds)
    assert po.gamma_dot[0] == gamma_dot_point(data.y[0], data.z[0], preds.mu0[0], preds.mu1[0], preds.pi1[0])


def test_if_mean_zero_and_scaling(rng):
    data = random_iv_data(rng, n=500)
    preds = _random_preds(rng, 500)
    po = compute_pseudo_outcomes(data, preds)
    chi = po.gamma_dot.mean() / po.delta_dot.mean()
    phi = chi_if_point(po.gamma_dot, po.delta_dot, chi, po.delta_dot.mean())
    assert abs(phi.mean()) < 1e-12
    from drml_iv.data_model import IvDataset
    scaled = IvDataset(3 * data.y, data.a, data.z, data.x)
    po3 = compute_pseudo_outcomes(scaled, preds._replace(mu0=3 * preds.mu0, mu1=3 * preds.mu1))
    np.testing.assert_allclose(po3.gamma_dot, 3 * po.gamma_dot, rtol=1e-12)
    np.testing.assert_array_equal(po3.delta_dot, po.delta_dot)


def test_misaligned_predictions(rng):
    data = random_iv_data(rng, n=10)
    with pytest.raises(InputError):
        compute_pseudo_outcomes(data, _random_preds(rng, 9))


def test_oracle_ratio_recovers_true_late():
    spec = ScenarioSpec.scenario(2)
    data, _ = generate_dataset(spec, 100_000, 31)
    preds = oracle_nuisance(spec).predict(data.x)
    po = compute_pseudo_outcomes(data, preds)
    chi = po.gamma_dot.mean() / po.delta_dot.mean()
    phi = chi_if_point(po.gamma_dot, po.delta_dot, chi, po.delta_dot.mean())
    se = np.sqrt(np.mean(phi ** 2) / data.n)
    truth, mc_se = reference_late(spec)
    assert abs(chi - truth) < 3 * np.hypot(se, mc_se)


def test_all_compliers_delta_mean_is_one():
    rng = np.random.default_rng(2)
    n = 10_000
    x = rng.normal(size=(n, 1))
    z = rng.integers(0, 2, n)
    from drml_iv.data_model import IvDataset
    from drml_iv.nuisance import NuisanceModel
    data = IvDataset(rng.normal(size=n), z, z, x)
    model = NuisanceModel.from_functions(lambda x: np.full(x.shape[0], 0.5), lambda x, z: 0 * x[:, 0],
                                         lambda x, z: np.full(x.shape[0], float(z)))
    po = compute_pseudo_outcomes(data, model.predict(data.x))
    se = po.delta_dot.std() / np.sqrt(n)
    assert abs(po.delta_dot.mean() - 1) <= 3 * se + 1e-12


def test_oracle_gamma_unbiased_for_gamma_function():
    spec = ScenarioSpec.scenario(2)
    data, _ = generate_dataset(spec, 100_000, 5)
    preds = oracle_nuisance(spec).predict(data.x)
    po = compute_pseudo_outcomes(data, preds)
    # E[gamma(X)] by quadrature over X1 and the two X2 levels
    t, w = np.polynomial.legendre.leggauss(64)
    target = 0.0
    for x2, p2 in ((0.0, 0.7), (1.0, 0.3)):
        xx = np.column_stack([t, np.full(64, x2)])
        nm = oracle_nuisance(spec).predict(xx)
        target += p2 * np.sum(w / 2 * (nm.mu1 - nm.mu0))
    se = po.gamma_dot.std() / np.sqrt(data.n)
    assert abs(po.gamma_dot.mean() - target) < 3 * se
