import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactotherm import autodiff as ad
from contactotherm.errors import InvalidArgumentError, ModelFormatError, SingularityError
from contactotherm.reparam import (KINDS, Reparametrization, ScalarMap, random_mix,
                                   random_reparametrization)

MAPS = {
    "affine": ScalarMap.affine(-1.7, 0.4),
    "exp": ScalarMap.exp(0.8, -1.5, 0.3),
    "ln": ScalarMap.ln(1.2, 3.0, 0.7),
    "tanh_affine": ScalarMap.tanh_affine(0.5, 1.3, 0.8),
    "odd_power": ScalarMap.odd_power(0.6),
}


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=40, deadline=None)
@given(x=st.floats(-2.0, 2.0))
def test_inverse_roundtrip(kind, x):
    m = MAPS[kind]
    y = float(m(x))
    assert m.inverse(y) == pytest.approx(x, abs=1e-12, rel=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_derivative_matches_central_difference(kind):
    m = MAPS[kind]
    for x in (-1.3, 0.0, 0.7):
        h = 1e-6
        fd = (float(m(x + h)) - float(m(x - h))) / (2 * h)
        assert float(m.derivative(x)) == pytest.approx(fd, rel=1e-7, abs=1e-8)
        # the forward map is jet-expressible and agrees with the closed derivative
        _, g, _ = ad.hessian(lambda v: m(v[0]), [x])
        assert g[0] == pytest.approx(float(m.derivative(x)), rel=1e-14)


def test_invalid_parameters():
    with pytest.raises(InvalidArgumentError):
        ScalarMap.affine(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        ScalarMap.tanh_affine(-2.0, 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        ScalarMap.odd_power(-1.0)


def test_exp_inverse_outside_image():
    with pytest.raises(SingularityError):
        ScalarMap.exp(1.0, 1.0, 0.0).inverse(-1.0)


def test_odd_power_singular_at_origin():
    rep = Reparametrization((ScalarMap.odd_power(0.0),), (ScalarMap.identity(),))
    with pytest.raises(SingularityError):
        rep.i_jacobian([0.0])
    assert rep.i_jacobian([1.0])[0, 0] == 3.0


def test_singular_mix_rejected():
    with pytest.raises(SingularityError):
        Reparametrization((ScalarMap.identity(),) * 2, (ScalarMap.identity(),) * 2,
                          np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_mixed_jacobian_against_jets(rng):
    rep = Reparametrization((MAPS["tanh_affine"], MAPS["ln"]), (MAPS["odd_power"], MAPS["affine"]),
                            random_mix(rng, 2), random_mix(rng, 2))
    I = np.array([0.3, -0.4])
    _, J = ad.jacobian(rep.i_forward, I)
    np.testing.assert_allclose(rep.i_jacobian(I), J, rtol=1e-14)
    E = np.array([0.2, 1.1])
    _, JE = ad.jacobian(rep.e_forward, E)
    np.testing.assert_allclose(rep.e_jacobian(E), JE, rtol=1e-14)
    np.testing.assert_allclose(rep.i_inverse([float(v) for v in rep.i_forward(I)]), I, atol=1e-12)
    np.testing.assert_allclose(rep.e_inverse([float(v) for v in rep.e_forward(E)]), E, atol=1e-12)


def test_second_derivatives_symmetric_and_correct():
    rep = Reparametrization((MAPS["exp"], MAPS["odd_power"]), (ScalarMap.identity(),) * 2)
    D = rep.i_second_derivatives([0.2, 0.5])
    assert D[0, 0, 0] == pytest.approx(-1.5 * 0.64 * math.exp(0.16), rel=1e-14)
    assert D[1, 1, 1] == pytest.approx(6 * 0.5, rel=1e-14)
    assert D[0, 1, 1] == 0.0 and D[0, 0, 1] == 0.0


def test_json_roundtrip(rng):
    rep = random_reparametrization(rng, 2, 1.0, 3.0, mix_probability=1.0)
    back = Reparametrization.from_json(json.dumps(rep.to_dict()), 2)
    I = np.array([0.4, -0.6])
    np.testing.assert_array_equal(back.i_jacobian(I), rep.i_jacobian(I))
    assert back.to_dict() == rep.to_dict()


def test_shipped_reparam_file_loads():
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "reparams" / "tanh_affine.json"
    rep = Reparametrization.from_json(path.read_text(), 2, str(path))
    assert not rep.i_is_affine and not rep.is_diagonal


@pytest.mark.parametrize("doc, fragment", [
    ({"i_map": [{"kind": "nope"}]}, "i_map[0].kind"),
    ({"i_map": [{"kind": "affine", "params": {"a": 0}}]}, "i_map[0]"),
    ({"i_map": [{"kind": "affine"}, {"kind": "affine"}]}, "must list 1 maps"),
    ({"mix": [[1, 0], [0, 1]]}, "1x1"),
    ({"other": 1}, "unknown field"),
])
def test_reparam_json_errors(doc, fragment):
    with pytest.raises(ModelFormatError) as info:
        Reparametrization.from_dict(doc, 1)
    assert fragment in str(info.value)


def test_random_draws_are_valid_on_the_box(rng):
    for n in (1, 2, 3):
        for _ in range(30):
            rep = random_reparametrization(rng, n, 1.0, 4.0)
            I = rng.uniform(-1, 1, n)
            E = rng.uniform(-4, 4, n)
            assert np.all(np.isfinite(rep.i_jacobian(I)))
            assert np.all(np.isfinite(rep.e_jacobian(E)))
            Et = [float(v) for v in rep.e_forward(E)]
            np.testing.assert_allclose(rep.e_inverse(Et), E, atol=1e-9)
