"""Statistical models, Gibbs states and their exact moments.

Sign convention: the Gibbs weight of a microstate ``x`` is
``exp(-phi + I . H(x) + log_g(x))`` so ``I`` is Massieu-conjugate to ``H``
(for ``H`` = energy, ``I = -1/T``).  ``phi(I) = ln Z(I)`` is the total
Massieu potential and its gradient gives the averages ``E = <H>``.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import autodiff as ad
from .errors import DomainError, InvalidArgumentError, UnsupportedOperationError

ENUMERATED = "enumerated"
ANALYTIC = "analytic"

#: pivot threshold (relative to the largest variance) for the affine-independence check
PIVOT_TOL = 1e-10


class Ensemble:
    """A statistical model with ``n`` observables.

    Build with :meth:`enumerated` (finite microstate table) or
    :meth:`analytic` (closed-form Massieu potential).  Instances are treated
    as immutable.
    """

    def __init__(self, kind, n, names, *, observables=None, log_degeneracy=None,
                 potential=None, domain=None, label=None, params=None):
        self.kind = kind
        self.n = int(n)
        self.names = tuple(names) if names is not None else tuple(f"x{a + 1}" for a in range(self.n))
        if len(self.names) != self.n:
            raise InvalidArgumentError(f"expected {self.n} names, got {len(self.names)}")
        self.observables = observables
        self.log_degeneracy = log_degeneracy
        self.potential = potential
        self.domain = domain
        self.label = label or kind
        self.params = dict(params or {})
        self.variance_scale = None
        if kind == ENUMERATED:
            self.variance_scale = _check_affine_independence(observables, log_degeneracy)

    @classmethod
    def enumerated(cls, observables, log_degeneracy=None, names=None, label=None, params=None):
        H = np.asarray(observables, dtype=float)
        if H.ndim == 1:
            H = H[:, None]
        if H.ndim != 2 or H.shape[1] < 1:
            raise InvalidArgumentError("observables must be an (m, n) table with n >= 1")
        if H.shape[0] < 2:
            raise InvalidArgumentError("an enumerated ensemble needs at least 2 microstates")
        if not np.all(np.isfinite(H)):
            raise InvalidArgumentError("observable values must be finite")
        if log_degeneracy is None:
            log_g = np.zeros(H.shape[0])
        else:
            log_g = np.asarray(log_degeneracy, dtype=float)
            if log_g.shape != (H.shape[0],) or not np.all(np.isfinite(log_g)):
                raise InvalidArgumentError("log_degeneracy must be finite, one per microstate")
        H.setflags(write=False)
        log_g.setflags(write=False)
        return cls(ENUMERATED, H.shape[1], names, observables=H, log_degeneracy=log_g,
                   label=label, params=params)

    @classmethod
    def analytic(cls, potential, n, names=None, domain=None, label=None, params=None):
        """``potential`` maps a list of ``n`` jets (or floats) to a jet (or float)."""
        if n < 1:
            raise InvalidArgumentError("n must be >= 1")
        if domain is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in domain)
            domain = (lo, hi)
        return cls(ANALYTIC, n, names, potential=potential, domain=domain,
                   label=label, params=params)

    @property
    def is_enumerated(self):
        return self.kind == ENUMERATED

    @property
    def num_microstates(self):
        return None if self.observables is None else self.observables.shape[0]

    def describe(self):
        return {"name": self.label, "kind": self.kind, "n": self.n,
                "names": list(self.names), "params": self.params}

    def extensive_bound(self, i_box=1.0):
        """An upper bound on ``|E_a|`` over the cube ``|I^a| <= i_box``."""
        if self.is_enumerated:
            return float(np.max(np.abs(self.observables)))
        corners = np.array(np.meshgrid(*[[-i_box, i_box]] * self.n)).reshape(self.n, -1).T
        return float(max(np.max(np.abs(equations_of_state(self, c))) for c in corners))


def _check_affine_independence(H, log_g):
    with np.errstate(over="ignore", invalid="ignore"):
        _, _, cov = _centered_moments(H, log_g, np.zeros(H.shape[1]))
    if not np.all(np.isfinite(cov)):
        raise InvalidArgumentError("observable values are too large: their variance overflows")
    scale = float(np.max(np.diag(cov)))
    # unpivoted Cholesky; a tiny pivot means some combination of observables is constant
    L = np.zeros_like(cov)
    n = cov.shape[0]
    for j in range(n):
        pivot = cov[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= PIVOT_TOL * max(scale, 1e-300):
            raise InvalidArgumentError(
                f"observables are affinely dependent across microstates "
                f"(Cholesky pivot {pivot:.3e} at observable {j})")
        L[j, j] = math.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (cov[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return float(np.trace(cov))


def _exponents(H, log_g, I):
    with np.errstate(over="ignore", invalid="ignore"):
        a = H @ I + log_g
    if not np.all(np.isfinite(a)):
        raise DomainError("log_partition", f"exponent overflow at I = {np.asarray(I).tolist()}")
    return a


def _log_weights(H, log_g, I):
    """Return ``(phi, log_p)`` with the log-sum-exp shift applied."""
    a = _exponents(H, log_g, I)
    top = a.max()
    phi = top + math.log(np.exp(a - top).sum())
    return phi, a - phi


def _centered_moments(H, log_g, I):
    phi, log_p = _log_weights(H, log_g, I)
    p = np.exp(log_p)
    mean = p @ H
    d = H - mean
    cov = (d * p[:, None]).T @ d
    return phi, mean, cov


def _check_dim(ens, I):
    if len(I) != ens.n:
        raise InvalidArgumentError(f"expected {ens.n} intensive values, got {len(I)}")


def _check_domain(ens, I):
    if ens.domain is None:
        return
    lo, hi = ens.domain
    if np.any(I < lo) or np.any(I > hi):
        raise DomainError("potential", f"I = {I.tolist()} outside the domain box [{lo.tolist()}, {hi.tolist()}]")


def _values(I):
    return np.array([x.value if isinstance(x, ad.Jet) else float(x) for x in I])


def log_partition(ens, I):
    """Massieu potential ``phi(I) = ln Z(I)``.

    ``I`` may hold floats (returns a float) or jets (returns a jet whose
    gradient and Hessian are the averages and covariances, chained through
    whatever the jets depend on).
    """
    _check_dim(ens, I)
    vals = _values(I)
    if ens.kind == ANALYTIC:
        _check_domain(ens, vals)
        return ens.potential(list(I))
    H, log_g = ens.observables, ens.log_degeneracy
    phi, log_p = _log_weights(H, log_g, vals)
    jets = [x for x in I if isinstance(x, ad.Jet)]
    if not jets:
        return phi
    order = min(x.order for x in jets)
    # derivatives of ln sum exp(a_x) contracted with the linear map a = H I
    p = np.exp(log_p)
    m1 = p @ H
    m2 = (H * p[:, None]).T @ H
    hess = m2 - np.outer(m1, m1)
    third = None
    if order >= 3:
        m3 = np.einsum("x,xa,xb,xc->abc", p, H, H, H)
        c = np.einsum("ab,c->abc", m2, m1)
        third = (m3 - c - c.transpose(0, 2, 1) - c.transpose(2, 1, 0)
                 + 2.0 * np.einsum("a,b,c->abc", m1, m1, m1))
    return ad.chain(phi, m1, hess, third, list(I))


@dataclass(frozen=True)
class GibbsState:
    ensemble: Ensemble
    I: np.ndarray
    phi: float
    probs: np.ndarray
    log_probs: np.ndarray


def _require_enumerated(ens, what):
    if not ens.is_enumerated:
        raise UnsupportedOperationError(f"{what} needs an enumerated ensemble (no microstates to weight)")


def gibbs_state(ens, I):
    _require_enumerated(ens, "gibbs_state")
    I = np.asarray(I, dtype=float)
    _check_dim(ens, I)
    if not np.all(np.isfinite(I)):
        raise InvalidArgumentError("I must be finite")
    phi, log_p = _log_weights(ens.observables, ens.log_degeneracy, I)
    probs = np.exp(log_p)
    I.setflags(write=False)
    probs.setflags(write=False)
    return GibbsState(ens, I, phi, probs, log_p)


def equations_of_state(ens, I):
    """Averages ``E_a = d phi / d I^a`` from the jet gradient."""
    I = np.asarray(I, dtype=float)
    _check_dim(ens, I)
    return ad.gradient(lambda xs: log_partition(ens, xs), I)[1]


def massieu_hessian(ens, I):
    """Value, gradient and Hessian of ``phi`` by forward-mode jets."""
    I = np.asarray(I, dtype=float)
    _check_dim(ens, I)
    return ad.hessian(lambda xs: log_partition(ens, xs), I)


def covariance_metric(ens, I):
    """``g_ab = <(H_a - E_a)(H_b - E_b)>`` by centered exact summation."""
    _require_enumerated(ens, "covariance_metric")
    I = np.asarray(I, dtype=float)
    _check_dim(ens, I)
    _, _, cov = _centered_moments(ens.observables, ens.log_degeneracy, I)
    return np.triu(cov) + np.triu(cov, 1).T


def microscopic_entropy(state, x):
    """``s(x) = phi - I . H(x)``."""
    m = state.probs.shape[0]
    if not 0 <= x < m:
        raise IndexError(f"microstate index {x} out of range [0, {m})")
    return state.phi - float(state.I @ state.ensemble.observables[x])


def shannon_entropy(state):
    """``S = -sum p ln(p / g)``; zero-probability states contribute nothing."""
    p = state.probs
    nz = p > 0
    return float(-np.sum(p[nz] * (state.log_probs[nz] - state.ensemble.log_degeneracy[nz])))


def sample_microstates(ens, I, samples, rng_seed):
    """Indices of i.i.d. microstates drawn from the Gibbs distribution."""
    state = gibbs_state(ens, I)
    cdf = np.cumsum(state.probs)
    cdf /= cdf[-1]
    rng = np.random.default_rng(rng_seed)
    idx = np.searchsorted(cdf, rng.random(samples), side="right")
    return np.minimum(idx, cdf.shape[0] - 1)


def mc_covariance(ens, I, samples, rng_seed):
    """Sample covariance of the observables and its delete-one jackknife error.

    Returns ``(cov, stderr)``, both ``(n, n)``.  Deterministic for a given seed.
    """
    _require_enumerated(ens, "mc_covariance")
    if samples < 2:
        raise InvalidArgumentError(f"samples must be >= 2, got {samples}")
    X = ens.observables[sample_microstates(ens, I, samples, rng_seed)]
    N = X.shape[0]
    d = X - X.mean(axis=0)
    S = d.T @ d
    cov = S / (N - 1)
    # leave-one-out covariance is (S - N/(N-1) d_i d_i^T) / (N-2)
    if N == 2:
        # leave-one-out covariance of a single draw is undefined
        return np.triu(cov) + np.triu(cov, 1).T, np.full_like(cov, np.nan)
    q = d[:, :, None] * d[:, None, :]
    spread = ((q - q.mean(axis=0)) ** 2).sum(axis=0)
    c = N / ((N - 1) * (N - 2))
    stderr = np.sqrt((N - 1) / N * c * c * spread)
    return np.triu(cov) + np.triu(cov, 1).T, stderr
