"""Structures on the (2n+1)-dimensional thermodynamic phase space.

Coordinates are ordered ``(phi, E_1..E_n, I^1..I^n)`` for every component
layout.  Symmetric tensors are plain ``(2n+1, 2n+1)`` arrays kept exactly
symmetric; one-forms are :class:`~contactotherm.exterior.KForm` of degree 1.

The equilibrium manifold is parametrized by the intensive variables ``I``.
``embed`` places it in the phase space either as ``I -> (phi, dphi/dI, I)``
or, for a reparametrization, as the point whose reparametrized extensive
coordinates are ``E~ = dphi/dI~``.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from . import autodiff as ad
from .ensemble import covariance_metric, massieu_hessian
from .errors import InvalidArgumentError, SingularityError
from .exterior import CoefficientField, KForm
from .reparam import Reparametrization

INVARIANCE_TOL = 1e-9
FIRST_LAW_TOL = 1e-12


def symmetrize(m):
    """Mirror the upper triangle so the result is exactly symmetric."""
    m = np.asarray(m, dtype=float)
    return np.triu(m) + np.triu(m, 1).T


@dataclass(frozen=True)
class PhasePoint:
    phi: float
    E: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        E = np.atleast_1d(np.asarray(self.E, dtype=float))
        I = np.atleast_1d(np.asarray(self.I, dtype=float))
        if E.shape != I.shape or E.ndim != 1:
            raise InvalidArgumentError("E and I must be vectors of equal length")
        if not (np.isfinite(self.phi) and np.all(np.isfinite(E)) and np.all(np.isfinite(I))):
            raise InvalidArgumentError("phase-space coordinates must be finite")
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "I", I)

    @property
    def n(self):
        return self.E.shape[0]

    @property
    def dim(self):
        return 2 * self.n + 1

    def coords(self):
        return np.concatenate([[self.phi], self.E, self.I])

    @classmethod
    def from_coords(cls, x):
        x = np.asarray(x, dtype=float)
        n = (x.shape[0] - 1) // 2
        return cls(x[0], x[1:1 + n], x[1 + n:])


def _rep_or_identity(rep, n):
    if rep is None:
        return Reparametrization.identity(n)
    if rep.n != n:
        raise InvalidArgumentError(f"reparametrization has n = {rep.n}, point has n = {n}")
    return rep


# contact forms ------------------------------------------------------------

def eta1(at):
    """``eta_1 = dphi - E_a dI^a``."""
    n = at.n
    return KForm.one_form(np.concatenate([[1.0], np.zeros(n), -at.E]))


def eta2(at, rep):
    """``eta_2 = dphi - E~_a~ dI~^a~`` in the original coordinates."""
    if rep is None:
        return eta1(at)
    rep = _rep_or_identity(rep, at.n)
    lam = rep.i_jacobian(at.I)
    rep.e_jacobian(at.E)
    e_tilde = np.array([float(y) for y in rep.e_forward(at.E)])
    return KForm.one_form(np.concatenate([[1.0], np.zeros(at.n), -(e_tilde @ lam)]))


def eta1_field(n):
    def coefficients(x):
        return [1.0] + [0.0] * n + [-x[1 + a] for a in range(n)]
    return CoefficientField(2 * n + 1, coefficients)


def eta2_field(rep):
    n = rep.n

    def coefficients(x):
        E, I = x[1:1 + n], x[1 + n:]
        e_tilde = rep.e_forward(E)
        lam = rep.i_jacobian_jets(I)
        out = []
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc = acc + e_tilde[b] * lam[b][a]
            out.append(-acc)
        return [1.0] + [0.0] * n + out

    return CoefficientField(2 * n + 1, coefficients)


# symmetric tensors ----------------------------------------------------------

def t_tensor(at, rep=None):
    """Symmetrized ``dE~_a~ (x) dI~^a~`` in the original coordinates."""
    n = at.n
    rep = _rep_or_identity(rep, n)
    lam = rep.i_jacobian(at.I)
    jac_e = rep.e_jacobian(at.E)
    block = 0.5 * (jac_e.T @ lam)        # [E_b, I^a]
    t = np.zeros((2 * n + 1, 2 * n + 1))
    t[1:1 + n, 1 + n:] = block
    t[1 + n:, 1:1 + n] = block.T
    return t


def metric_G(at, rep=None):
    """``G = eta (x) eta + t`` with ``eta_1, t_1`` (identity) or ``eta_2, t_2``."""
    eta = eta1(at) if rep is None else eta2(at, rep)
    return symmetrize(np.outer(eta.coeffs, eta.coeffs) + t_tensor(at, rep))


# embeddings and pullbacks ---------------------------------------------------

@dataclass
class _Embedding:
    point: PhasePoint
    tangent: np.ndarray
    hessian: np.ndarray
    e_tilde: np.ndarray
    correction: np.ndarray


def _embed(ens, I, rep):
    I = np.atleast_1d(np.asarray(I, dtype=float))
    phi, E, H = massieu_hessian(ens, I)
    n = ens.n
    if rep is None:
        tangent = np.vstack([E[None, :], H, np.eye(n)])
        return _Embedding(PhasePoint(phi, E, I), tangent, H, E, np.zeros((n, n)))
    rep = _rep_or_identity(rep, n)
    lam = rep.i_jacobian(I)
    second = rep.i_second_derivatives(I)
    e_tilde = np.linalg.solve(lam.T, E)
    # Lambda^T dE~/dI = H - sum_a~ E~_a~ d^2 I~^a~ / dI dI
    correction = symmetrize(np.einsum("a,abc->bc", e_tilde, second))
    de_tilde = np.linalg.solve(lam.T, H - correction)
    E_orig = rep.e_inverse(e_tilde)
    jac_e = rep.e_jacobian(E_orig)
    dE = np.linalg.solve(jac_e, de_tilde)
    tangent = np.vstack([E[None, :], dE, np.eye(n)])
    return _Embedding(PhasePoint(phi, E_orig, I), tangent, H, e_tilde, correction)


def embed(ens, I, rep=None):
    """Point of the equilibrium manifold over ``I`` and its tangent matrix.

    The tangent is the ``(2n+1, n)`` Jacobian ``d(phi, E, I)/dI``.  With a
    reparametrization the returned point is in original coordinates; its
    reparametrized extensive values are ``rep.e_forward(point.E)``.
    """
    emb = _embed(ens, I, rep)
    return emb.point, emb.tangent


def chart_correction(ens, I, rep):
    """``sum_a~ E~_a~ d^2 I~^a~/dI dI`` on the reparametrized embedding.

    This is the difference between the Hessian of ``phi`` in the ``I`` chart
    and the Hessian of ``phi`` in the ``I~`` chart, both written in ``I``
    components; it vanishes exactly when ``I~`` is affine in ``I``.
    """
    return _embed(ens, I, rep).correction


def pullback(T, tangent):
    """Pull a one-form or a symmetric 2-tensor back along ``tangent``."""
    tangent = np.asarray(tangent, dtype=float)
    if tangent.ndim != 2:
        raise InvalidArgumentError("tangent must be a matrix")
    if isinstance(T, KForm):
        if T.degree != 1:
            raise InvalidArgumentError("only one-forms can be pulled back as covectors")
        if tangent.shape[0] != T.dim:
            raise InvalidArgumentError(f"tangent has {tangent.shape[0]} rows, form has dimension {T.dim}")
        return tangent.T @ T.coeffs
    T = np.asarray(T, dtype=float)
    if T.shape != (tangent.shape[0], tangent.shape[0]):
        raise InvalidArgumentError(f"tensor shape {T.shape} does not match tangent rows {tangent.shape[0]}")
    return symmetrize(tangent.T @ T @ tangent)


METRIC_NAMES = ("pullback_G1", "pullback_G2", "pullback_t1", "pullback_t2",
                "hessian", "covariance")


@dataclass
class InvarianceReport:
    metrics: dict
    deviations: dict
    max_delta: float
    first_law_eta1: float
    first_law_eta2: float
    chart_correction: float
    tol: float = INVARIANCE_TOL
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_delta <= self.tol)


def verify_invariance_chain(ens, I, rep=None, tol=INVARIANCE_TOL):
    """Compare the six routes to the equilibrium metric at ``I``.

    The routes are the pullbacks of ``G_1``/``t_1`` along the plain embedding,
    of ``G_2``/``t_2`` along the reparametrized one, the Hessian of ``phi``
    and (for enumerated models) the covariance of the observables.
    """
    r = _rep_or_identity(rep, ens.n)
    base = _embed(ens, I, None)
    rep_emb = _embed(ens, I, r)
    p1, j1 = base.point, base.tangent
    p2, j2 = rep_emb.point, rep_emb.tangent
    metrics = {
        "pullback_G1": pullback(metric_G(p1), j1),
        "pullback_G2": pullback(metric_G(p2, r), j2),
        "pullback_t1": pullback(t_tensor(p1), j1),
        "pullback_t2": pullback(t_tensor(p2, r), j2),
        "hessian": symmetrize(base.hessian),
    }
    if ens.is_enumerated:
        metrics["covariance"] = covariance_metric(ens, I)
    deviations = {}
    for a, b in combinations(metrics, 2):
        deviations[f"{a}~{b}"] = float(np.max(np.abs(metrics[a] - metrics[b])))
    first1 = float(np.max(np.abs(pullback(eta1(p1), j1))))
    first2 = float(np.max(np.abs(pullback(eta2(p2, r), j2))))
    return InvarianceReport(metrics, deviations, max(deviations.values()), first1, first2,
                            float(np.max(np.abs(rep_emb.correction))), tol)


def first_law_residuals(ens, I, rep=None):
    """``max |iota*(eta_1)|`` and ``max |iota~*(eta_2)|``."""
    p1, j1 = embed(ens, I)
    r = _rep_or_identity(rep, ens.n)
    p2, j2 = embed(ens, I, r)
    return (float(np.max(np.abs(pullback(eta1(p1), j1)))),
            float(np.max(np.abs(pullback(eta2(p2, r), j2)))))


def contact_signature(at, cutoff=1e-10):
    """Numbers of positive and negative eigenvalues of ``G_1`` on ``ker eta_1``."""
    basis = null_space(eta1(at).coeffs[None, :])
    restricted = symmetrize(basis.T @ metric_G(at) @ basis)
    w = np.linalg.eigvalsh(restricted)
    return int(np.sum(w > cutoff)), int(np.sum(w < -cutoff))


# Legendre transformations --------------------------------------------------

@dataclass(frozen=True)
class LegendrePartition:
    """Indices ``i`` (bitmask) whose pairs ``(E_i, I^i)`` are exchanged."""

    n: int
    mask: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError("n must be >= 1")
        if not 0 <= self.mask < (1 << self.n):
            raise InvalidArgumentError(f"mask {self.mask} out of range for n = {self.n}")

    @classmethod
    def total(cls, n):
        return cls(n, (1 << n) - 1)

    @classmethod
    def empty(cls, n):
        return cls(n, 0)

    @classmethod
    def from_indices(cls, n, indices):
        mask = 0
        for i in indices:
            if not 0 <= i < n:
                raise InvalidArgumentError(f"index {i} out of range for n = {n}")
            mask |= 1 << i
        return cls(n, mask)

    @classmethod
    def all(cls, n):
        return [cls(n, m) for m in range(1 << n)]

    def __contains__(self, i):
        return bool(self.mask >> i & 1)

    @property
    def indices(self):
        return [i for i in range(self.n) if i in self]

    @property
    def is_total(self):
        return self.mask == (1 << self.n) - 1


def legendre_map(x, part):
    """The Legendre transformation on a coordinate list (floats or jets)."""
    n = part.n
    phi, E, I = x[0], list(x[1:1 + n]), list(x[1 + n:])
    new_E, new_I = list(E), list(I)
    for i in part.indices:
        phi = phi - I[i] * E[i]
        new_I[i] = -E[i]
        new_E[i] = I[i]
    return [phi] + new_E + new_I


def legendre_transform(at, part):
    """``phi' = phi - I^i E_i``, ``I'^i = -E_i``, ``E'_i = I^i`` for ``i`` in the partition."""
    if part.n != at.n:
        raise InvalidArgumentError(f"partition has n = {part.n}, point has n = {at.n}")
    return PhasePoint.from_coords(np.array(legendre_map(list(at.coords()), part), dtype=float))


def legendre_pullback_eta(at, part):
    """Components of ``f*(eta_1)`` at ``at`` for the Legendre map ``f``."""
    image, jac = ad.jacobian(lambda xs: legendre_map(xs, part), at.coords())
    return jac.T @ eta1(PhasePoint.from_coords(image)).coeffs


def legendre_submanifold(Phi, part, at):
    """Point and tangent of the Legendre submanifold generated by ``Phi``.

    ``at`` holds the mixed coordinates ``q``: ``E_i`` for ``i`` in the
    partition and ``I^j`` otherwise; ``Phi`` maps ``q`` (as jets) to a jet.
    Then ``E_j = dPhi/dI^j``, ``I^i = -dPhi/dE_i`` and
    ``phi = Phi - E_i dPhi/dE_i``.  Returns ``(PhasePoint, tangent)`` with the
    tangent taken with respect to ``q``.
    """
    n = part.n
    q = np.atleast_1d(np.asarray(at, dtype=float))
    if q.shape != (n,):
        raise InvalidArgumentError(f"expected {n} mixed coordinates")
    value, grad, hess = ad.hessian(Phi, q)
    S = np.array([i in part for i in range(n)])
    E = np.where(S, q, grad)
    I = np.where(S, -grad, q)
    phi = value - float(np.sum(q[S] * grad[S]))
    eye = np.eye(n)
    dE = np.where(S[:, None], eye, hess)
    dI = np.where(S[:, None], -hess, eye)
    dphi = grad - np.where(S, grad, 0.0) - (q * S) @ hess
    tangent = np.vstack([dphi[None, :], dE, dI])
    return PhasePoint(phi, E, I), tangent


# Ruppeiner metric -------------------------------------------------------------

RUPPEINER_TOL = 1e-4
HESSIAN_DET_TOL = 1e-12


@dataclass
class RuppeinerReport:
    E_grid: np.ndarray
    I_grid: np.ndarray
    transported: np.ndarray
    entropy_hessian: np.ndarray
    rel_deviation: np.ndarray
    max_rel_deviation: float
    tol: float = RUPPEINER_TOL
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_rel_deviation <= self.tol)


def _solve_I(ens, E, start=None):
    from .maxent import MaxEntProblem, solve
    from .errors import InfeasibleTargetError, NonConvergenceError
    try:
        return solve(MaxEntProblem(ens, E, initial_I=start))
    except (InfeasibleTargetError, NonConvergenceError) as exc:
        raise SingularityError(f"E(I) is not invertible at E = {np.asarray(E).tolist()}: {exc}") from None


def transported_metric(ens, I):
    """``iota*(G_1)`` transported by the total Legendre transformation ``f``.

    ``G_1`` is pushed forward by ``f`` (components ``J^-T G_1 J^-1`` at the
    image point) and pulled back along the transformed equilibrium manifold
    ``f(iota)``, parametrized by ``E`` (tangent ``J T_I (d^2 phi)^-1``).
    """
    point, tangent = embed(ens, I)
    H = tangent[1:1 + ens.n]
    if abs(np.linalg.det(H)) < HESSIAN_DET_TOL:
        raise SingularityError(f"Hessian of phi is singular at I = {np.asarray(I).tolist()}")
    tangent_E = tangent @ np.linalg.inv(H)
    part = LegendrePartition.total(ens.n)
    _, jac = ad.jacobian(lambda xs: legendre_map(xs, part), point.coords())
    jinv = np.linalg.inv(jac)
    pushed = symmetrize(jinv.T @ metric_G(point) @ jinv)
    return pullback(pushed, jac @ tangent_E)


def entropy_hessian_fd(ens, E, I_start=None):
    """``-d^2 S / dE dE`` by central differences of maxent entropies.

    The step along ``E_a`` is ``1e-3`` times the standard deviation of
    ``H_a``; results for ``h`` and ``h/2`` are Richardson-combined.
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    n = E.shape[0]
    base = _solve_I(ens, E, I_start)
    sd = np.sqrt(np.diag(massieu_hessian(ens, base.I)[2]))

    def S(x):
        return _solve_I(ens, x, base.I).entropy

    def hess(scale):
        h = 1e-3 * scale * sd
        out = np.empty((n, n))
        s0 = base.entropy
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = h[a]
            out[a, a] = (S(E + ea) - 2.0 * s0 + S(E - ea)) / h[a] ** 2
            for b in range(a):
                eb = np.zeros(n)
                eb[b] = h[b]
                out[a, b] = out[b, a] = (S(E + ea + eb) - S(E + ea - eb) - S(E - ea + eb)
                                         + S(E - ea - eb)) / (4.0 * h[a] * h[b])
        return out

    return -(4.0 * hess(0.5) - hess(1.0)) / 3.0, base.I


def ruppeiner_check(ens, E_grid, tol=RUPPEINER_TOL):
    """Compare the Legendre-transported metric with ``-Hess_E S`` on a grid of ``E``."""
    E_grid = np.asarray(E_grid, dtype=float).reshape(-1, ens.n)
    I_grid, transported, fd, rel = [], [], [], []
    start = None
    for E in E_grid:
        R, I = entropy_hessian_fd(ens, E, start)
        start = I
        T = transported_metric(ens, I)
        I_grid.append(I)
        transported.append(T)
        fd.append(R)
        rel.append(float(np.max(np.abs(T - R)) / np.max(np.abs(R))))
    rel = np.array(rel)
    return RuppeinerReport(E_grid, np.array(I_grid), np.array(transported), np.array(fd),
                           rel, float(rel.max()), tol)
