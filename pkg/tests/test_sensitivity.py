import numpy as np
import pytest
from hypothesis import given, strategies as st

from drml_iv.errors import InputError
from drml_iv.sensitivity import frontier_delta2, sensitivity_surface, xi

d1s = st.floats(0.0, 1.0)
d2s = st.floats(-2.0, 2.0)
nonzero = st.floats(0.05, 1.0) | st.floats(-1.0, -0.05)


def test_worked_case_is_zero():
    assert xi(-0.04, 0.5, 0.25, 0.08) == 0.0


@given(st.floats(-3, 3), nonzero, d2s)
def test_no_defiers(chi, D, d2):
    assert xi(chi, D, 0.0, d2) == chi


@given(st.floats(-3, 3), nonzero, d1s)
def test_equal_effects(chi, D, d1):
    assert xi(chi, D, d1, 0.0) == chi


@given(st.floats(-3, 3), nonzero, st.floats(0.0, 0.5), d2s, st.floats(0.0, 2.0))
def test_bilinear(chi, D, d1, d2, c):
    lhs = xi(chi, D, c * d1, d2) - chi
    rhs = c * (xi(chi, D, d1, d2) - chi)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_frontier_closed_form():
    assert frontier_delta2(-0.04, 0.5, 0.1) == pytest.approx(0.2, abs=1e-15)


def test_surface_shape_and_frontier():
    s = sensitivity_surface(-0.04, 0.5)
    assert s.xi.shape == (101, 161)
    assert len(s.long_rows()) == 101 * 161
    np.testing.assert_array_equal(s.xi[0], -0.04)
    np.testing.assert_array_equal(s.xi[:, 80], -0.04)
    d1, d2 = s.frontier[:, 0], s.frontier[:, 1]
    assert np.max(np.abs(xi(-0.04, 0.5, d1, d2))) < 1e-12
    assert np.max(np.abs(d1 * d2 + (-0.04) * 0.5)) < 1e-12
    assert np.all(np.diff(np.abs(d2)) < 0)


def test_frontier_excludes_out_of_range():
    s = sensitivity_surface(0.8, 0.5)
    assert np.all(np.abs(s.frontier[:, 1]) <= 2.0)
    assert s.frontier[:, 0].min() >= 0.2 - 1e-12


def test_zero_chi_frontier_is_axes():
    s = sensitivity_surface(0.0, 0.5, 11, 9)
    on_axis = (s.frontier[:, 0] == 0) | (s.frontier[:, 1] == 0)
    assert on_axis.all()
    prod = np.outer(s.delta1_grid, s.delta2_grid) / 0.5
    np.testing.assert_array_equal(np.sign(s.xi), np.sign(prod))


def test_small_perturbations_keep_sign():
    s = sensitivity_surface(-0.04, 0.23, 101, 161)
    small = (s.delta1_grid[:, None] <= 0.05) & (np.abs(s.delta2_grid[None, :]) <= 0.1)
    assert s.sign_preserved()[small].all()


def test_errors():
    with pytest.raises(InputError):
        xi(0.1, 0.0, 0.1, 0.1)
    with pytest.raises(InputError):
        xi(0.1, 0.5, 1.5, 0.1)
    with pytest.raises(InputError):
        xi(0.1, 0.5, 0.1, 2.5)
    with pytest.warns(UserWarning):
        xi(0.1, 0.5, 0.1, 2.5, y_binary=False)
