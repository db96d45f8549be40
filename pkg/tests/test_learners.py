import numpy as np
import pytest
from hypothesis import given, strategies as st

from drml_iv.errors import InputError
from drml_iv.learners import (
    ConstantFit,
    LearnerSpec,
    LogisticFit,
    StackFit,
    fit,
    nnls_weights,
    predict,
    superlearner,
)


def test_linear_exact():
    x = np.linspace(-2, 3, 50).reshape(-1, 1)
    m = fit("linear", x, 1 + 2 * x[:, 0])
    np.testing.assert_allclose([m.intercept, m.coef[0]], [1.0, 2.0], atol=1e-10)


def test_linear_collinear_falls_back_to_ridge():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 1))
    X = np.column_stack([x, x])
    m = fit("linear", X, 3 * x[:, 0])
    np.testing.assert_allclose(m.predict(X), 3 * x[:, 0], atol=1e-6)


def test_tree_learns_noiseless_step():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (1000, 1))
    m = fit("tree", x, (x[:, 0] > 0).astype(float))
    grid = np.linspace(-1, 1, 1000).reshape(-1, 1)
    assert np.mean((m.predict(grid) - (grid[:, 0] > 0)) ** 2) < 1e-6


def test_tree_leaves_respect_min_leaf():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 3))
    y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 + 0.1 * rng.normal(size=500)
    m = fit(LearnerSpec("tree", min_leaf=15), x, y)
    counts = np.bincount(m.leaf_ids(x))
    assert counts[counts > 0].min() >= 15


def test_tree_piecewise_constant_within_leaf():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(400, 2))
    m = fit("tree", x, x[:, 0] + rng.normal(scale=0.1, size=400))
    leaves = m.leaf_ids(x)
    pred = m.predict(x)
    for leaf in np.unique(leaves):
        assert np.ptp(pred[leaves == leaf]) == 0.0


def test_pruning_shrinks_noise_tree():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(1000, 2))
    y = rng.normal(size=1000)
    full = fit("tree", x, y)
    pruned = fit("pruned_tree", x, y)
    assert pruned.n_leaves < full.n_leaves


def test_tree_row_order_invariant_with_duplicates():
    rng = np.random.default_rng(4)
    x = np.round(rng.uniform(size=(300, 2)), 1)
    y = x[:, 0] * 2 + np.round(rng.normal(size=300), 1)
    x = np.vstack([x, x[:50]])
    y = np.concatenate([y, y[:50]])
    perm = rng.permutation(x.shape[0])
    for spec in ("pruned_tree", "superlearner"):
        a = fit(spec, x, y).predict(x)
        b = fit(spec, x[perm], y[perm]).predict(x)
        np.testing.assert_array_equal(a, b)


def test_logistic_score_equation():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(2000, 3))
    p = 1 / (1 + np.exp(-(0.3 + X @ [1.0, -0.5, 0.2])))
    y = (rng.random(2000) < p).astype(float)
    m = fit("logistic", X, y)
    assert m.converged and not m.separated
    D = np.column_stack([np.ones(2000), X])
    assert np.max(np.abs(D.T @ (y - m.predict(X)))) < 1e-6


def test_logistic_zero_coefficients_give_half():
    m = LogisticFit("logistic", 2, intercept=0.0, coef=np.zeros(2), is_probability=True)
    np.testing.assert_array_equal(predict(m, np.ones((3, 2))), 0.5)


def test_logistic_separation_caps_coefficients():
    x = np.linspace(-1, 1, 40).reshape(-1, 1)
    m = fit("logistic", x, (x[:, 0] > 0).astype(float))
    assert m.separated
    assert np.max(np.abs(m.coef)) <= 30.0 + 1e-12


def test_constant_predictor():
    m = fit("linear", np.ones((5, 1)), np.full(5, 3.5))
    assert isinstance(m, ConstantFit)
    np.testing.assert_array_equal(m.predict(np.zeros((4, 1))), 3.5)


def test_stack_prefers_linear_member_on_linear_data():
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, (2000, 1))
    y = 1 + 2 * x[:, 0] + 0.1 * rng.normal(size=2000)
    m = fit(LearnerSpec("stack", members=(LearnerSpec("linear"), LearnerSpec("tree"))), x, y)
    assert m.weights[0] >= 0.9


def test_stack_weights_are_convex():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, (800, 2))
    y = np.where(x[:, 0] > 0, 1.0, 0.0) + x[:, 1] + 0.2 * rng.normal(size=800)
    m = fit(superlearner(), x, y)
    assert np.all(m.weights >= 0)
    assert abs(m.weights.sum() - 1) < 1e-12


def test_stack_unit_weight_equals_member():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(300, 2))
    y = x[:, 0] + rng.normal(size=300)
    m = fit(superlearner(), x, y)
    one = StackFit(m.kind, 2, members=m.members, weights=np.array([1.0, 0.0, 0.0]), cv_mse=m.cv_mse)
    np.testing.assert_array_equal(one.predict(x), m.members[0].predict(x))


def test_probability_stack_in_unit_interval():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(600, 2))
    y = (rng.random(600) < 1 / (1 + np.exp(-2 * x[:, 0]))).astype(float)
    pred = fit(superlearner(), x, y, is_probability=True).predict(rng.normal(size=(200, 2)) * 3)
    assert pred.min() >= 0 and pred.max() <= 1


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_nnls_weights_feasible(k, seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(100, k))
    y = P @ rng.random(k) + rng.normal(size=100)
    w, _ = nnls_weights(P, y)
    assert np.all(w >= 0)


def test_dimension_mismatch():
    m = fit("linear", np.ones((5, 2)) + np.arange(10).reshape(5, 2) ** 2, np.arange(5.0))
    with pytest.raises(InputError, match="dimension mismatch"):
        m.predict(np.ones((3, 3)))


def test_spec_validation():
    with pytest.raises(InputError):
        LearnerSpec("stack")
    with pytest.raises(InputError):
        LearnerSpec("stack", members=(superlearner(),))
    with pytest.raises(InputError):
        fit("forest", np.ones((3, 1)), np.arange(3.0))
