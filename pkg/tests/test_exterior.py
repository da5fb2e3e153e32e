import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactotherm.errors import InvalidArgumentError
from contactotherm.exterior import (CoefficientField, KForm, basis, exterior_derivative,
                                    nonintegrability_volume, wedge, wedge_power)
from contactotherm.phase_space import eta1_field


def test_basis_is_lexicographic():
    combos, index = basis(3, 2)
    assert list(combos) == [(0, 1), (0, 2), (1, 2)]
    assert index[(1, 2)] == 2


def test_wedge_of_basis_one_forms():
    dx, dy = KForm.basis_form(3, 0), KForm.basis_form(3, 1)
    w = wedge(dx, dy)
    assert w.component(0, 1) == 1.0
    assert w.component(1, 0) == -1.0
    assert wedge(dy, dx).component(0, 1) == -1.0


def test_wedge_with_self_vanishes():
    a = KForm.one_form([1.0, 2.0, -3.0])
    assert np.all(wedge(a, a).coeffs == 0.0)


def test_wedge_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        wedge(KForm.one_form([1.0, 0.0]), KForm.one_form([1.0, 0.0, 0.0]))


def test_degree_overflow():
    a = KForm.basis_form(2, 0, 1)
    with pytest.raises(InvalidArgumentError):
        wedge(a, KForm.basis_form(2, 0))


def test_determinant_from_top_form(rng):
    # the wedge of n one-forms has top coefficient det(rows)
    M = rng.normal(size=(4, 4))
    forms = [KForm.one_form(row) for row in M]
    top = forms[0]
    for f in forms[1:]:
        top = wedge(top, f)
    assert top.coeffs[0] == pytest.approx(np.linalg.det(M), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5),
       st.lists(st.floats(-10, 10), min_size=10, max_size=10))
def test_graded_anticommutativity(a, b):
    alpha = KForm.one_form(a)
    beta = KForm(5, 2, b)
    # (1-form) ^ (2-form) commutes: sign (-1)^(1*2) = +1
    assert np.array_equal(wedge(alpha, beta).coeffs, wedge(beta, alpha).coeffs)
    g = KForm.one_form(b[:5])
    assert np.array_equal(wedge(alpha, g).coeffs, -wedge(g, alpha).coeffs)


def test_exterior_derivative_of_x_dy():
    field = CoefficientField(2, lambda x: [0.0 * x[0], x[0]])
    d = exterior_derivative(field, [0.3, 0.4])
    assert d.component(0, 1) == pytest.approx(1.0)


def test_d_of_exact_form_vanishes():
    # d(f) for f = x y z: coefficients (yz, xz, xy); d of it is zero
    field = CoefficientField(3, lambda x: [x[1] * x[2], x[0] * x[2], x[0] * x[1]])
    d = exterior_derivative(field, [0.5, -1.2, 2.0])
    assert np.max(np.abs(d.coeffs)) < 1e-14


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_eta1_nonintegrability_is_factorial(n, rng):
    x = rng.uniform(-1, 1, 2 * n + 1)
    v = nonintegrability_volume(eta1_field(n), x, n)
    assert abs(v) == math.factorial(n)
    assert v == (-1) ** (n * (n + 1) // 2) * math.factorial(n)


def test_wedge_power_zero_is_one():
    assert wedge_power(KForm.basis_form(3, 0, 1), 0).coeffs[0] == 1.0


def test_integrable_form_has_zero_volume():
    # dphi is closed so dphi ^ d(dphi) = 0
    field = CoefficientField(3, lambda x: [1.0 + 0.0 * x[0], 0.0 * x[0], 0.0 * x[0]])
    assert nonintegrability_volume(field, [0.1, 0.2, 0.3], 1) == 0.0
