"""Maximum-entropy multipliers from target averages.

The entropy functional is never optimized over distributions directly.
Eliminating the normalization multiplier leaves the smooth convex dual
``D(I) = phi(I) - I . E*`` whose stationary point solves ``dphi/dI = E*``;
it is minimized by damped Newton steps with the exact Hessian.
"""
from dataclasses import dataclass, field

import numpy as np

from .ensemble import massieu_hessian
from .errors import (DomainError, InfeasibleTargetError, InvalidArgumentError,
                     NonConvergenceError)

ARMIJO = 1e-4
DIVERGENCE_RADIUS = 1e3
#: smallest Hessian eigenvalue, relative to the I = 0 variance scale, before
#: the distribution is considered collapsed onto a face of the hull
COLLAPSE_TOL = 1e-12


@dataclass
class MaxEntProblem:
    ensemble: object
    targets: np.ndarray
    initial_I: np.ndarray = None
    tol: float = 1e-10
    max_iter: int = 100

    def __post_init__(self):
        self.targets = np.atleast_1d(np.asarray(self.targets, dtype=float))
        n = self.ensemble.n
        if self.targets.shape != (n,):
            raise InvalidArgumentError(f"expected {n} targets, got {self.targets.shape[0]}")
        if not np.all(np.isfinite(self.targets)):
            raise InvalidArgumentError("targets must be finite")
        if self.initial_I is None:
            self.initial_I = np.zeros(n)
        self.initial_I = np.asarray(self.initial_I, dtype=float)


@dataclass
class MaxEntResult:
    I: np.ndarray
    phi: float
    entropy: float
    iterations: int
    residual: float
    dual_history: list = field(default_factory=list)


def _cholesky_solve(H, g):
    """Solve ``H x = g``, adding Levenberg damping if Cholesky fails."""
    n = H.shape[0]
    lam = 1e-8 * np.trace(H) / n
    lam = lam if lam > 0 else 1e-8
    A = H
    for _ in range(30):
        try:
            L = np.linalg.cholesky(A)
            break
        except np.linalg.LinAlgError:
            A = H + lam * np.eye(n)
            lam *= 10.0
    else:
        raise np.linalg.LinAlgError("Hessian could not be regularized")
    y = np.linalg.solve(L, g)
    return np.linalg.solve(L.T, y)


def solve(problem):
    """Find multipliers ``I*`` with ``dphi/dI(I*) = E*``.

    Returns a :class:`MaxEntResult`; ``entropy`` is ``phi* - I* . E*``, the
    maximum entropy compatible with the targets.
    """
    ens = problem.ensemble
    target = problem.targets
    I = problem.initial_I.copy()
    scale = ens.variance_scale
    if scale is None:
        # analytic models: curvature scale at the starting point
        scale = float(np.trace(massieu_hessian(ens, I)[2]))

    def dual(x):
        phi, grad, hess = massieu_hessian(ens, x)
        return phi - x @ target, phi, grad, hess

    D, phi, grad, hess = dual(I)
    history = [D]
    residual = float(np.max(np.abs(grad - target)))
    for it in range(1, problem.max_iter + 1):
        F = grad - target
        step = -_cholesky_solve(hess, F)
        small_step = np.max(np.abs(step)) <= 1e-6 * (1.0 + np.max(np.abs(I)))
        if residual <= problem.tol and small_step:
            # one more Newton step is essentially free and tightens I*
            trial = I + step
            Dt, phit, gradt, hesst = dual(trial)
            rt = float(np.max(np.abs(gradt - target)))
            if rt <= residual and Dt <= D:
                I, D, phi, grad, hess, residual = trial, Dt, phit, gradt, hesst, rt
                history.append(D)
            _check_interior(hess, scale, target)
            return MaxEntResult(I, phi, phi - I @ target, it, residual, history)
        slope = F @ step
        # below rounding level in D, judge steps by the residual instead
        flat = -slope <= 64.0 * np.finfo(float).eps * max(1.0, abs(D))
        t = 1.0
        for _ in range(60):
            trial = I + t * step
            try:
                Dt, phit, gradt, hesst = dual(trial)
            except (ArithmeticError, DomainError):
                Dt = np.inf
            if flat:
                if np.isfinite(Dt) and np.max(np.abs(gradt - target)) < residual:
                    break
            elif Dt <= D + ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            raise NonConvergenceError("line search failed to decrease the dual", residual)
        I, D, phi, grad, hess = trial, Dt, phit, gradt, hesst
        history.append(D)
        residual = float(np.max(np.abs(grad - target)))
        if np.max(np.abs(I)) > DIVERGENCE_RADIUS:
            raise InfeasibleTargetError(
                f"targets {target.tolist()} are outside the achievable hull "
                f"(dual unbounded below: |I| > {DIVERGENCE_RADIUS:g})")
        _check_interior(hess, scale, target)
    raise NonConvergenceError(f"no convergence in {problem.max_iter} iterations", residual)


def _check_interior(hess, scale, target):
    if np.linalg.eigvalsh(hess)[0] <= COLLAPSE_TOL * scale:
        raise InfeasibleTargetError(
            f"targets {target.tolist()} lie on or outside the boundary of the achievable hull "
            f"(the Gibbs distribution collapses onto a face)")


def solve_targets(ens, targets, **kwargs):
    return solve(MaxEntProblem(ens, targets, **kwargs))
