"""Scalar curvature of the Hessian metric ``g_ab = d^2 phi / dI^a dI^b``."""
import numpy as np

from . import autodiff as ad
from .ensemble import log_partition
from .errors import SingularityError

#: smallest admissible eigenvalue of ``g`` before it counts as singular
METRIC_TOL = 1e-12


def christoffel(ens, I):
    """``Gamma^a_bc = 1/2 g^{ad} d_d d_b d_c phi`` from order-3 jets."""
    _, _, g, third = ad.derivatives_up_to_third(lambda xs: log_partition(ens, xs), I)
    w = np.linalg.eigvalsh(g)
    if w[0] <= METRIC_TOL:
        raise SingularityError(f"metric is singular at I = {np.asarray(I).tolist()} (min eigenvalue {w[0]:.3e})")
    return g, 0.5 * np.linalg.solve(g, third.reshape(g.shape[0], -1)).reshape(third.shape)


def riemann_from_christoffel(gamma, dgamma):
    """``R^a_bcd`` from ``Gamma[a, b, c]`` and ``dgamma[e, a, b, c] = d_e Gamma^a_bc``."""
    return (np.einsum("cadb->abcd", dgamma) - np.einsum("dacb->abcd", dgamma)
            + np.einsum("ace,edb->abcd", gamma, gamma)
            - np.einsum("ade,ecb->abcd", gamma, gamma))


def scalar_from_riemann(g, riemann):
    ricci = np.einsum("abad->bd", riemann)
    return float(np.einsum("bd,bd->", np.linalg.inv(g), ricci))


def curvature_scalar(ens, I, step=1e-4):
    """Ricci scalar of the equilibrium metric at ``I``.

    Christoffel symbols are exact (order-3 jets); their derivatives use a
    central difference with ``step`` and ``step/2`` combined by one Richardson
    extrapolation.
    """
    I = np.atleast_1d(np.asarray(I, dtype=float))
    n = I.shape[0]
    g, gamma = christoffel(ens, I)

    def central(h):
        out = np.empty((n,) + gamma.shape)
        for e in range(n):
            dx = np.zeros(n)
            dx[e] = h
            out[e] = (christoffel(ens, I + dx)[1] - christoffel(ens, I - dx)[1]) / (2.0 * h)
        return out

    dgamma = (4.0 * central(step / 2.0) - central(step)) / 3.0
    return scalar_from_riemann(g, riemann_from_christoffel(gamma, dgamma))
