import itertools
import math

import numpy as np
import pytest

from contactotherm.curvature import (christoffel, curvature_scalar, riemann_from_christoffel,
                                     scalar_from_riemann)
from contactotherm.ensemble import Ensemble
from contactotherm.errors import SingularityError
from contactotherm.models import ising_ring, quadratic, two_level


def test_sphere_has_positive_curvature():
    """Unit sphere in (theta, phi): R = 2 fixes the sign convention."""
    th = 0.7
    s, c = math.sin(th), math.cos(th)
    g = np.diag([1.0, s * s])
    gamma = np.zeros((2, 2, 2))
    gamma[0, 1, 1] = -s * c
    gamma[1, 0, 1] = gamma[1, 1, 0] = c / s
    dgamma = np.zeros((2, 2, 2, 2))
    dgamma[0, 0, 1, 1] = -(c * c - s * s)
    dgamma[0, 1, 0, 1] = dgamma[0, 1, 1, 0] = -1.0 / (s * s)
    assert scalar_from_riemann(g, riemann_from_christoffel(gamma, dgamma)) == pytest.approx(2.0, rel=1e-14)


def test_one_dimensional_is_flat():
    assert curvature_scalar(two_level(), [0.3]) == 0.0


def test_quadratic_is_flat():
    assert abs(curvature_scalar(quadratic(), [0.3, -0.2])) < 1e-12


def test_independent_subsystems_are_flat():
    # phi(I) = ln(1 + e^{2 I1}) + ln(1 + e^{3 I2}) is a product metric
    ens = Ensemble.enumerated([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0], [2.0, 3.0]])
    assert abs(curvature_scalar(ens, [0.2, -0.4])) < 1e-8


def brute_metric(N, I):
    rows = []
    for spins in itertools.product((-1, 1), repeat=N):
        rows.append((-sum(spins[k] * spins[(k + 1) % N] for k in range(N)), sum(spins)))
    H = np.array(rows, dtype=float)
    w = np.exp(H @ I)
    p = w / w.sum()
    d = H - p @ H
    return (d * p[:, None]).T @ d


def levi_civita_scalar(metric, x, h=1e-3):
    """Scalar curvature by finite differences of a general metric."""
    n = len(x)

    def gamma_at(y):
        g = metric(y)
        dg = np.empty((n, n, n))
        for c in range(n):
            e = np.zeros(n)
            e[c] = h
            dg[c] = (metric(y + e) - metric(y - e)) / (2 * h)
        # Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)
        low = 0.5 * (np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg)
        return np.einsum("ad,dbc->abc", np.linalg.inv(g), low)

    dgam = np.empty((n, n, n, n))
    for e_ in range(n):
        e = np.zeros(n)
        e[e_] = h
        dgam[e_] = (gamma_at(x + e) - gamma_at(x - e)) / (2 * h)
    return scalar_from_riemann(metric(x), riemann_from_christoffel(gamma_at(x), dgam))


@pytest.mark.parametrize("I", [(-0.3, 0.1), (0.4, 0.5), (-1.0, -0.2)])
def test_ising_against_levi_civita_oracle(I):
    I = np.array(I)
    ref = levi_civita_scalar(lambda y: brute_metric(4, y), I)
    got = curvature_scalar(ising_ring(4), I)
    assert got == pytest.approx(ref, rel=1e-4)


def test_christoffel_lowered_is_symmetric():
    _, gamma = christoffel(ising_ring(6), [0.2, -0.3])
    assert np.allclose(gamma, gamma.transpose(0, 2, 1), atol=1e-15)


def test_singular_metric():
    # phi = I1^2 I2^2 has a singular Hessian at the origin
    ens = Ensemble.analytic(lambda I: I[0] * I[0] * I[1] * I[1], 2)
    with pytest.raises(SingularityError):
        curvature_scalar(ens, [0.0, 0.0])
