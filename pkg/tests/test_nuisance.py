import numpy as np
import pytest

from conftest import random_iv_data
from drml_iv.data_model import IvDataset
from drml_iv.errors import InputError
from drml_iv.learners import LearnerSpec
from drml_iv.nuisance import NuisanceModel, fit_nuisances, make_folds, predict_out_of_fold


def test_make_folds_small_balanced():
    z = np.array([0, 1] * 5)
    plan = make_folds(10, 2, z, seed=0)
    for f in range(2):
        rows = plan.rows(f)
        assert rows.size == 5
        assert sorted([(z[rows] == 0).sum(), (z[rows] == 1).sum()]) == [2, 3]


def test_make_folds_deterministic_and_even():
    z = (np.random.default_rng(0).random(10_000) < 0.37).astype(int)
    a = make_folds(10_000, 5, z, seed=4)
    b = make_folds(10_000, 5, z, seed=4)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    sizes = np.bincount(a.assignment)
    assert sizes.max() - sizes.min() <= 2
    for arm in (0, 1):
        counts = np.bincount(a.assignment[z == arm])
        assert counts.max() - counts.min() <= 1


def test_make_folds_errors():
    with pytest.raises(InputError):
        make_folds(6, 4, [0, 0, 0, 1, 1, 1], seed=0)
    with pytest.raises(InputError):
        make_folds(6, 1, [0, 0, 0, 1, 1, 1], seed=0)


def test_pi_matches_marginal_when_z_independent():
    rng = np.random.default_rng(1)
    n = 5000
    x = rng.normal(size=(n, 2))
    z = (rng.random(n) < 0.3).astype(int)
    a = z * (rng.random(n) < 0.8)
    data = IvDataset(rng.normal(size=n), a, z, x)
    folds = make_folds(n, 5, data.z, 0)
    model = fit_nuisances(data, folds, "glm", "glm", "glm")
    pred = predict_out_of_fold(model, data, folds)
    assert abs(pred.pi1.mean() - z.mean()) < 0.02


def test_identical_regressions_when_y_equals_a(rng):
    base = random_iv_data(rng, n=600)
    data = IvDataset(base.a.astype(float), base.a, base.z, base.x)
    folds = make_folds(data.n, 3, data.z, 0)
    pred = predict_out_of_fold(fit_nuisances(data, folds, "glm", "glm", "glm"), data, folds)
    np.testing.assert_allclose(pred.mu0, pred.lam0, atol=1e-12)
    np.testing.assert_allclose(pred.mu1, pred.lam1, atol=1e-12)


def test_truncation_and_clipping():
    model = NuisanceModel.from_functions(
        lambda x: np.full(x.shape[0], 0.001),
        lambda x, z: np.full(x.shape[0], 2.0),
        lambda x, z: np.full(x.shape[0], 1.3 if z else -0.2),
        epsilon=0.01, y_binary=True,
    )
    pred = model.predict(np.zeros((4, 1)))
    np.testing.assert_array_equal(pred.pi1, 0.01)
    np.testing.assert_array_equal(pred.lam1, 1.0)
    np.testing.assert_array_equal(pred.lam0, 0.0)
    np.testing.assert_array_equal(pred.mu0, 1.0)


def test_two_fold_role_swap(rng):
    data = random_iv_data(rng, n=300)
    folds = make_folds(data.n, 2, data.z, 3)
    model = fit_nuisances(data, folds, "glm", "glm", "glm")
    pred = predict_out_of_fold(model, data, folds)
    rows0 = folds.rows(0)
    other = model.fold_fits[0].pi.predict(data.x[rows0])
    np.testing.assert_array_equal(pred.pi1[rows0], np.clip(other, 0.01, 0.99))


def test_constant_learners_give_constant_vectors(rng):
    data = random_iv_data(rng, n=200)
    folds = make_folds(data.n, 2, data.z, 0)
    mean = LearnerSpec("mean")
    pred = predict_out_of_fold(fit_nuisances(data, folds, mean, mean, mean), data, folds)
    for vec in pred:
        f0 = vec[folds.rows(0)]
        assert np.ptp(f0) == 0


def test_out_of_fold_independence(rng):
    data = random_iv_data(rng, n=500)
    folds = make_folds(data.n, 5, data.z, 1)
    base = predict_out_of_fold(fit_nuisances(data, folds, "tree", "tree", "tree"), data, folds)
    g = 2
    y = data.y.copy()
    y[folds.assignment == g] = 1e3
    altered = IvDataset(y, data.a, data.z, data.x)
    new = predict_out_of_fold(fit_nuisances(altered, folds, "tree", "tree", "tree"), altered, folds)
    rows = folds.rows(g)
    np.testing.assert_array_equal(new.mu0[rows], base.mu0[rows])
    np.testing.assert_array_equal(new.mu1[rows], base.mu1[rows])


def test_fit_is_deterministic(rng):
    data = random_iv_data(rng, n=400)
    folds = make_folds(data.n, 4, data.z, 9)
    a = predict_out_of_fold(fit_nuisances(data, folds, "superlearner", "superlearner", "superlearner"), data, folds)
    b = predict_out_of_fold(fit_nuisances(data, folds, "superlearner", "superlearner", "superlearner"), data, folds)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


def test_oracle_passthrough():
    x = np.linspace(-1, 1, 11).reshape(-1, 1)
    pi = lambda x: 1 / (1 + np.exp(-x[:, 0]))
    model = NuisanceModel.from_functions(pi, lambda x, z: x[:, 0] * 0, lambda x, z: x[:, 0] * 0 + 0.5 * z)
    np.testing.assert_array_equal(model.predict(x).pi1, np.clip(pi(x), 0.01, 0.99))
