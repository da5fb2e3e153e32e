"""Forward-mode truncated Taylor arithmetic ("jets").

A :class:`Jet` carries the value of a scalar expression together with its
gradient and Hessian (and, for order-3 jets, the symmetric array of third
derivatives) with respect to a fixed set of seeded input variables.  Every
elementary function propagates these parts with the exact chain rule, so the
derivatives of a composed map are correct to rounding error.

Symmetric parts are kept exactly symmetric: after every operation only the
canonical (sorted-index) entries are trusted and mirrored into the rest.
"""
from functools import lru_cache
import math

import numpy as np

from .errors import DomainError, InvalidArgumentError

__all__ = [
    "Jet", "seed", "constant", "chain", "elementary",
    "add", "mul", "div", "exp", "log", "ln", "tanh", "power", "log_sum_exp",
    "hessian", "gradient", "jacobian", "derivatives_up_to_third",
]


@lru_cache(maxsize=None)
def _canonical_index3(v):
    idx = np.empty((v, v, v), dtype=np.intp)
    for i in range(v):
        for j in range(v):
            for k in range(v):
                a, b, c = sorted((i, j, k))
                idx[i, j, k] = (a * v + b) * v + c
    return idx.ravel()


def _sym2(h):
    upper = np.triu(h)
    return upper + np.triu(h, 1).T


def _sym3(t):
    v = t.shape[0]
    return t.ravel()[_canonical_index3(v)].reshape(v, v, v)


class Jet:
    """Truncated Taylor expansion of a scalar in ``nvars`` seeded variables."""

    __slots__ = ("value", "grad", "hess", "third")
    # make numpy scalars defer to the Jet operators
    __array_ufunc__ = None

    def __init__(self, value, grad, hess=None, third=None):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = None if hess is None else _sym2(np.asarray(hess, dtype=float))
        if third is not None and hess is None:
            raise InvalidArgumentError("an order-3 jet needs a Hessian part")
        self.third = None if third is None else _sym3(np.asarray(third, dtype=float))

    @property
    def order(self):
        if self.hess is None:
            return 1
        return 2 if self.third is None else 3

    @property
    def nvars(self):
        return self.grad.shape[0]

    def truncate(self, order):
        """Drop derivative parts above ``order``."""
        if order >= self.order:
            return self
        return Jet(self.value, self.grad,
                   self.hess if order >= 2 else None, None)

    def __repr__(self):
        return f"Jet(value={self.value!r}, grad={self.grad.tolist()!r}, order={self.order})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -other)

    def __rsub__(self, other):
        return add(-self, other)

    def __neg__(self):
        return Jet(-self.value, -self.grad,
                   None if self.hess is None else -self.hess,
                   None if self.third is None else -self.third)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        return power(self, p)


def _is_jet(x):
    return isinstance(x, Jet)


def constant(x, like):
    """A jet with value ``x`` and zero derivatives, shaped like ``like``."""
    v = like.nvars
    order = like.order
    return Jet(x, np.zeros(v),
               np.zeros((v, v)) if order >= 2 else None,
               np.zeros((v, v, v)) if order >= 3 else None)


def seed(values, order=2):
    """Independent variables: jet ``i`` has gradient ``e_i``."""
    if order not in (1, 2, 3):
        raise InvalidArgumentError(f"order must be 1, 2 or 3, got {order}")
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.ndim != 1:
        raise InvalidArgumentError("seed values must be a flat vector")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"seed values must be finite, got {values.tolist()}")
    v = values.shape[0]
    eye = np.eye(v)
    jets = []
    for i, x in enumerate(values):
        jets.append(Jet(x, eye[i],
                        np.zeros((v, v)) if order >= 2 else None,
                        np.zeros((v, v, v)) if order >= 3 else None))
    return jets


def _unary(u, f0, f1, f2, f3):
    g = u.grad
    hess = third = None
    if u.hess is not None:
        hess = f2 * np.outer(g, g) + f1 * u.hess
    if u.third is not None:
        gh = np.einsum("i,jk->ijk", g, u.hess)
        third = (f3 * np.einsum("i,j,k->ijk", g, g, g)
                 + f2 * (gh + gh.transpose(1, 0, 2) + gh.transpose(1, 2, 0))
                 + f1 * u.third)
    return Jet(f0, f1 * g, hess, third)


def chain(value, grad, hess, third, inner):
    """Compose an outer function of ``m`` arguments with ``m`` inner jets.

    ``grad``, ``hess`` and ``third`` are the outer function's derivatives
    with respect to its arguments, evaluated at the inner values.  Derivative
    orders the outer function does not supply cap the result's order.
    """
    jets = [x for x in inner if _is_jet(x)]
    if not jets:
        raise InvalidArgumentError("chain needs at least one jet argument")
    ref = jets[0]
    order = min(x.order for x in jets)
    if hess is None:
        order = 1
    elif third is None:
        order = min(order, 2)
    inner = [x if _is_jet(x) else constant(x, ref) for x in inner]

    f1 = np.asarray(grad, dtype=float)
    ug = np.stack([x.grad for x in inner])
    out_grad = f1 @ ug
    out_hess = out_third = None
    if order >= 2:
        f2 = np.asarray(hess, dtype=float)
        uh = np.stack([x.hess for x in inner])
        out_hess = ug.T @ f2 @ ug + np.einsum("a,aij->ij", f1, uh)
    if order >= 3:
        f3 = np.asarray(third, dtype=float)
        ut = np.stack([x.third for x in inner])
        x = np.einsum("ab,ai,bjk->ijk", f2, ug, uh)
        out_third = (np.einsum("abc,ai,bj,ck->ijk", f3, ug, ug, ug)
                     + x + x.transpose(1, 0, 2) + x.transpose(1, 2, 0)
                     + np.einsum("a,aijk->ijk", f1, ut))
    return Jet(value, out_grad, out_hess, out_third)


# elementary operations ----------------------------------------------------

def add(a, b):
    if not (_is_jet(a) or _is_jet(b)):
        return a + b
    if not _is_jet(a):
        a, b = b, a
    if not _is_jet(b):
        return Jet(a.value + b, a.grad, a.hess, a.third)
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    return Jet(a.value + b.value, a.grad + b.grad,
               None if order < 2 else a.hess + b.hess,
               None if order < 3 else a.third + b.third)


def mul(a, b):
    if not (_is_jet(a) or _is_jet(b)):
        return a * b
    if not _is_jet(a):
        a, b = b, a
    if not _is_jet(b):
        b = float(b)
        return Jet(a.value * b, a.grad * b,
                   None if a.hess is None else a.hess * b,
                   None if a.third is None else a.third * b)
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    hess = third = None
    if order >= 2:
        gg = np.outer(a.grad, b.grad)
        hess = a.value * b.hess + b.value * a.hess + gg + gg.T
    if order >= 3:
        x = np.einsum("i,jk->ijk", a.grad, b.hess) + np.einsum("i,jk->ijk", b.grad, a.hess)
        third = (a.value * b.third + b.value * a.third
                 + x + x.transpose(1, 0, 2) + x.transpose(1, 2, 0))
    return Jet(a.value * b.value, a.value * b.grad + b.value * a.grad, hess, third)


def _reciprocal(u):
    if u.value == 0.0:
        raise DomainError("div", "denominator has zero value")
    r = 1.0 / u.value
    return _unary(u, r, -r * r, 2.0 * r ** 3, -6.0 * r ** 4)


def div(a, b):
    if not _is_jet(b):
        if b == 0:
            raise DomainError("div", "denominator has zero value")
        if not _is_jet(a):
            return a / b
        return mul(a, 1.0 / b)
    return mul(a, _reciprocal(b))


def exp(u):
    if not _is_jet(u):
        return np.exp(u)
    e = math.exp(u.value)
    return _unary(u, e, e, e, e)


def log(u):
    if not _is_jet(u):
        if np.any(np.asarray(u) <= 0):
            raise DomainError("ln", f"argument must be positive, got {u}")
        return np.log(u)
    x = u.value
    if not x > 0.0:
        raise DomainError("ln", f"argument must be positive, got {x}")
    r = 1.0 / x
    return _unary(u, math.log(x), r, -r * r, 2.0 * r ** 3)


ln = log


def tanh(u):
    if not _is_jet(u):
        return np.tanh(u)
    t = math.tanh(u.value)
    s = 1.0 - t * t
    return _unary(u, t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0))


def power(u, p):
    """``u ** p`` for a real constant exponent."""
    p = float(p)
    integral = p.is_integer()
    if not _is_jet(u):
        if not integral and np.any(np.asarray(u) <= 0):
            raise DomainError("pow", f"non-integer power of non-positive value {u}")
        return np.power(u, p)
    x = u.value
    if not integral and x <= 0.0:
        raise DomainError("pow", f"non-integer power {p} of non-positive value {x}")
    if x == 0.0:
        if p < 0:
            raise DomainError("pow", f"negative power {p} of zero")
        d = [math.prod(p - i for i in range(k)) * 0.0 ** (p - k) if p >= k else 0.0
             for k in range(4)]
        return _unary(u, *d)
    return _unary(u, x ** p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2),
                  p * (p - 1) * (p - 2) * x ** (p - 3))


def log_sum_exp(args):
    """``ln(sum(exp(args)))`` with the running maximum subtracted first."""
    args = list(args)
    if not args:
        raise InvalidArgumentError("log_sum_exp needs at least one argument")
    vals = np.array([x.value if _is_jet(x) else float(x) for x in args])
    if not np.all(np.isfinite(vals)):
        raise DomainError("log_sum_exp", "non-finite exponent")
    top = vals.max()
    w = np.exp(vals - top)
    total = w.sum()
    value = top + math.log(total)
    if not any(_is_jet(x) for x in args):
        return value
    p = w / total
    f2 = np.diag(p) - np.outer(p, p)
    m = len(args)
    eye = np.eye(m)
    f3 = (np.einsum("a,ab,ac->abc", p, eye, eye)
          - np.einsum("a,c,ab->abc", p, p, eye)
          - np.einsum("a,b,ac->abc", p, p, eye)
          - np.einsum("a,b,bc->abc", p, p, eye)
          + 2.0 * np.einsum("a,b,c->abc", p, p, p))
    return chain(value, p, f2, f3, args)


_ELEMENTARY = {
    "add": lambda a, b: add(a, b),
    "mul": lambda a, b: mul(a, b),
    "div": lambda a, b: div(a, b),
    "exp": exp,
    "ln": log,
    "log": log,
    "tanh": tanh,
    "pow": power,
    "log_sum_exp": lambda *xs: log_sum_exp(xs),
}


def elementary(name, *args):
    """Apply an elementary operation by name (``add``, ``mul``, ``div``,
    ``exp``, ``ln``, ``tanh``, ``pow``, ``log_sum_exp``)."""
    try:
        f = _ELEMENTARY[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown elementary function {name!r}") from None
    return f(*args)


# derivative drivers ---------------------------------------------------------

def _as_jet(result, like):
    return result if _is_jet(result) else constant(float(result), like)


def hessian(f, at):
    """Value, gradient and Hessian of the scalar map ``f`` at ``at``.

    ``f`` receives a list of seeded jets and must return a jet.
    """
    xs = seed(at, 2)
    out = _as_jet(f(xs), xs[0])
    return out.value, out.grad.copy(), out.hess.copy()


def gradient(f, at):
    xs = seed(at, 1)
    out = _as_jet(f(xs), xs[0])
    return out.value, out.grad.copy()


def derivatives_up_to_third(f, at):
    xs = seed(at, 3)
    out = _as_jet(f(xs), xs[0])
    return out.value, out.grad.copy(), out.hess.copy(), out.third.copy()


def jacobian(f, at):
    """Values and Jacobian of a vector map; ``f`` returns a list of jets."""
    xs = seed(at, 1)
    outs = [_as_jet(y, xs[0]) for y in f(xs)]
    values = np.array([y.value for y in outs])
    jac = np.stack([y.grad for y in outs]) if outs else np.zeros((0, len(xs)))
    return values, jac
