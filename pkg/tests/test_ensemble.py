import itertools
import json
import math

import numpy as np
import pytest

from contactotherm import autodiff as ad
from contactotherm.ensemble import (Ensemble, covariance_metric, equations_of_state, gibbs_state,
                                    log_partition, massieu_hessian, mc_covariance, microscopic_entropy,
                                    sample_microstates, shannon_entropy)
from contactotherm.errors import (DomainError, InvalidArgumentError, ModelFormatError,
                                  UnsupportedOperationError)
from contactotherm.models import (build_model, ising_ring, load_model_file, parse_model_spec,
                                  quadratic, two_level)


def brute_ising(N, J, h, I):
    """phi, <H> and covariance for the periodic chain by direct summation."""
    rows = []
    for spins in itertools.product((-1, 1), repeat=N):
        bond = sum(spins[k] * spins[(k + 1) % N] for k in range(N))
        M = sum(spins)
        rows.append((-J * bond - h * M, M))
    w = [math.exp(I[0] * e + I[1] * m) for e, m in rows]
    Z = math.fsum(w)
    mean = [math.fsum(wi * r[a] for wi, r in zip(w, rows)) / Z for a in range(2)]
    cov = [[math.fsum(wi * (r[a] - mean[a]) * (r[b] - mean[b]) for wi, r in zip(w, rows)) / Z
            for b in range(2)] for a in range(2)]
    return math.log(Z), np.array(mean), np.array(cov)


def test_two_level_at_zero():
    ens = two_level(2.0)
    phi, E, H = massieu_hessian(ens, [0.0])
    assert phi == pytest.approx(math.log(2), abs=1e-15)
    assert E[0] == pytest.approx(1.0, abs=1e-15)
    assert H[0, 0] == pytest.approx(1.0, abs=1e-15)
    assert covariance_metric(ens, [0.0])[0, 0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("I", [(0.0, 0.0), (-0.3, 0.1), (0.5, -0.7)])
def test_ising_matches_brute_force(I):
    ens = ising_ring(4, J=1.0, h=0.2)
    phi_ref, mean_ref, cov_ref = brute_ising(4, 1.0, 0.2, I)
    phi, E, H = massieu_hessian(ens, I)
    assert phi == pytest.approx(phi_ref, abs=1e-12)
    np.testing.assert_allclose(E, mean_ref, atol=1e-12)
    np.testing.assert_allclose(H, cov_ref, atol=1e-11)
    np.testing.assert_allclose(covariance_metric(ens, I), cov_ref, atol=1e-11)


def test_ising_uniform_entropy():
    state = gibbs_state(ising_ring(4), [0.0, 0.0])
    assert shannon_entropy(state) == pytest.approx(math.log(16), abs=1e-13)
    assert np.allclose(state.probs, 1 / 16)


def test_entropy_legendre_identity(models, rng):
    for key in ("two_level", "ising4", "ising8"):
        ens = models[key]
        for _ in range(5):
            I = rng.uniform(-1, 1, ens.n)
            state = gibbs_state(ens, I)
            E = equations_of_state(ens, I)
            assert abs(shannon_entropy(state) + I @ E - state.phi) < 1e-10


def test_microscopic_entropy(models):
    ens = models["two_level"]
    state = gibbs_state(ens, [0.4])
    # s = phi - I H(x)
    assert microscopic_entropy(state, 1) == pytest.approx(state.phi - 0.4 * 2.0, abs=1e-14)
    with pytest.raises(IndexError):
        microscopic_entropy(state, 5)


def test_gradient_equals_gibbs_average(models, rng):
    ens = models["ising8"]
    for _ in range(5):
        I = rng.uniform(-1, 1, 2)
        state = gibbs_state(ens, I)
        np.testing.assert_allclose(equations_of_state(ens, I), state.probs @ ens.observables, atol=1e-10)


def test_quadratic_is_exact():
    ens = quadratic([[2.0, 1.0], [1.0, 2.0]], [0.5, -1.0])
    phi, E, H = massieu_hessian(ens, [0.3, -0.2])
    C = np.array([[2.0, 1.0], [1.0, 2.0]])
    I = np.array([0.3, -0.2])
    assert phi == pytest.approx(0.5 * I @ C @ I + 0.5 * 0.3 + 0.2, abs=1e-15)
    np.testing.assert_allclose(E, C @ I + [0.5, -1.0], atol=1e-15)
    np.testing.assert_array_equal(H, C)


def test_analytic_has_no_gibbs_state(models):
    with pytest.raises(UnsupportedOperationError):
        gibbs_state(models["quadratic"], [0.0, 0.0])
    with pytest.raises(UnsupportedOperationError):
        covariance_metric(models["quadratic"], [0.0, 0.0])


def test_affine_dependence_rejected():
    H = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InvalidArgumentError):
        Ensemble.enumerated(H)


def test_constant_observable_rejected():
    with pytest.raises(InvalidArgumentError):
        Ensemble.enumerated(np.array([[1.0], [1.0], [1.0]]))


def test_domain_box():
    ens = Ensemble.analytic(lambda I: -ad.log(1.0 - I[0]), 1, domain=([-5.0], [0.9]))
    with pytest.raises(DomainError):
        log_partition(ens, [0.95])


def test_overflow_is_domain_error():
    with pytest.raises(DomainError):
        log_partition(two_level(10.0), [1e308])
    with pytest.raises(InvalidArgumentError, match="too large"):
        two_level(1e300)


def test_wrong_dimension(models):
    with pytest.raises(InvalidArgumentError):
        massieu_hessian(models["ising4"], [0.0])


def test_ising_size_limits():
    with pytest.raises(InvalidArgumentError):
        ising_ring(21)
    with pytest.raises(InvalidArgumentError):
        ising_ring(1)


def test_sampling_is_deterministic(models):
    a = sample_microstates(models["ising4"], [0.1, 0.2], 1000, 5)
    b = sample_microstates(models["ising4"], [0.1, 0.2], 1000, 5)
    assert np.array_equal(a, b)


def test_mc_covariance_two_level_seed_1():
    cov, se = mc_covariance(two_level(2.0), [0.0], 10 ** 6, 1)
    assert abs(cov[0, 0] - 1.0) <= 5 * se[0, 0]


def test_mc_covariance_small_samples(models):
    with pytest.raises(InvalidArgumentError):
        mc_covariance(models["two_level"], [0.0], 1, 0)
    cov, se = mc_covariance(models["two_level"], [0.0], 2, 0)
    assert np.isnan(se).all()


def test_jackknife_against_explicit_leave_one_out(models):
    ens = models["ising4"]
    I = [0.2, -0.1]
    cov, se = mc_covariance(ens, I, 40, 3)
    X = ens.observables[sample_microstates(ens, I, 40, 3)]
    loo = np.array([np.cov(np.delete(X, i, axis=0), rowvar=False) for i in range(40)])
    ref = np.sqrt(39 / 40 * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    np.testing.assert_allclose(cov, np.cov(X, rowvar=False), atol=1e-12)
    np.testing.assert_allclose(se, ref, rtol=1e-9)


def test_model_spec_parsing():
    assert parse_model_spec("ising_ring:N=6,J=0.5") == ("ising_ring", {"N": 6, "J": 0.5})
    assert parse_model_spec("quadratic:C=[[3,0],[0,1]],b=[1,2]")[1]["C"] == [[3, 0], [0, 1]]
    with pytest.raises(InvalidArgumentError, match="unknown model"):
        parse_model_spec("nope")
    with pytest.raises(InvalidArgumentError, match="no parameter"):
        parse_model_spec("two_level:x=1")
    assert build_model("ising_ring:N=6").num_microstates == 64


def test_model_file_roundtrip(tmp_path):
    doc = {"n": 1, "names": ["H"], "microstates": [{"H": [0.0]}, {"H": [1.0], "log_g": math.log(3)}]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    ens = load_model_file(str(path))
    # Z(0) = 1 + 3
    assert log_partition(ens, [0.0]) == pytest.approx(math.log(4), abs=1e-15)


@pytest.mark.parametrize("doc, fragment", [
    ({"microstates": []}, "missing field 'n'"),
    ({"n": 1, "microstates": [{"H": [0.0]}, {"H": ["a"]}]}, "microstates[1].H[0]"),
    ({"n": 1, "microstates": [{"H": [0.0]}, {"H": [1.0], "extra": 1}]}, "unknown field"),
    ({"n": 2, "microstates": [{"H": [0.0]}]}, "microstates[0].H"),
])
def test_model_file_errors(tmp_path, doc, fragment):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError) as info:
        load_model_file(str(path))
    assert fragment in str(info.value)


def test_model_file_syntax_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 1,\n "microstates": [}')
    with pytest.raises(ModelFormatError, match=r"bad.json:2:\d+"):
        load_model_file(str(path))
