"""Pointwise exterior algebra on a ``d``-dimensional coordinate space.

A degree-``k`` form is stored densely over the ``C(d, k)`` strictly
increasing index tuples in lexicographic order, so antisymmetry is
structural.  The positive orientation is the coordinate order itself
(``phi, E_1..E_n, I^1..I^n`` on the phase space).
"""
from functools import lru_cache
from itertools import combinations
import math

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgumentError

MAX_DIM = 11


@lru_cache(maxsize=None)
def basis(d, k):
    """Increasing index tuples of length ``k`` and their position lookup."""
    tuples = tuple(combinations(range(d), k))
    return tuples, {t: i for i, t in enumerate(tuples)}


def _shuffle_sign(a, b):
    inversions = sum(1 for x in a for y in b if x > y)
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_table(d, k, l):
    """For each output tuple, the list of ``(i_alpha, i_beta, sign)`` terms."""
    left, _ = basis(d, k)
    right, _ = basis(d, l)
    out, out_index = basis(d, k + l)
    terms = [[] for _ in out]
    for ia, a in enumerate(left):
        sa = set(a)
        for ib, b in enumerate(right):
            if sa.isdisjoint(b):
                t = tuple(sorted(a + b))
                terms[out_index[t]].append((ia, ib, _shuffle_sign(a, b)))
    return tuple(tuple(x) for x in terms)


class KForm:
    """An antisymmetric degree-``k`` tensor at a point of ``R^d``."""

    __slots__ = ("dim", "degree", "coeffs")

    def __init__(self, dim, degree, coeffs=None):
        if not 1 <= dim <= MAX_DIM:
            raise InvalidArgumentError(f"dimension must be in [1, {MAX_DIM}], got {dim}")
        if not 0 <= degree <= dim:
            raise InvalidArgumentError(f"degree {degree} out of range for dimension {dim}")
        size = math.comb(dim, degree)
        if coeffs is None:
            coeffs = np.zeros(size)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (size,):
            raise InvalidArgumentError(f"expected {size} coefficients, got shape {coeffs.shape}")
        self.dim = dim
        self.degree = degree
        self.coeffs = coeffs

    @classmethod
    def from_dict(cls, dim, degree, entries):
        """Build from ``{index_tuple: value}``; tuples are sorted with sign."""
        _, index = basis(dim, degree)
        c = np.zeros(math.comb(dim, degree))
        for t, val in entries.items():
            t = tuple(t)
            if len(set(t)) < len(t):
                continue
            order = sorted(range(len(t)), key=t.__getitem__)
            sign = _permutation_sign(order)
            c[index[tuple(sorted(t))]] += sign * val
        return cls(dim, degree, c)

    @classmethod
    def one_form(cls, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return cls(coeffs.shape[0], 1, coeffs)

    @classmethod
    def basis_form(cls, dim, *indices):
        """``dx^{i1} ^ dx^{i2} ^ ...`` (indices in the given order)."""
        return cls.from_dict(dim, len(indices), {tuple(indices): 1.0})

    def component(self, *indices):
        """Coefficient on ``dx^{i1} ^ ...`` with the antisymmetric sign applied."""
        if len(indices) != self.degree:
            raise InvalidArgumentError(f"expected {self.degree} indices")
        if len(set(indices)) < len(indices):
            return 0.0
        order = sorted(range(len(indices)), key=indices.__getitem__)
        _, index = basis(self.dim, self.degree)
        return _permutation_sign(order) * self.coeffs[index[tuple(sorted(indices))]]

    def items(self):
        tuples, _ = basis(self.dim, self.degree)
        return zip(tuples, self.coeffs)

    def __add__(self, other):
        _check_same(self, other)
        return KForm(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return KForm(self.dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return KForm(self.dim, self.degree, -self.coeffs)

    def __mul__(self, s):
        return KForm(self.dim, self.degree, self.coeffs * float(s))

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        return f"KForm(dim={self.dim}, degree={self.degree}, coeffs={self.coeffs.tolist()})"


def _permutation_sign(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def _check_same(a, b):
    if a.dim != b.dim or a.degree != b.degree:
        raise InvalidArgumentError("forms must share dimension and degree")


def wedge(alpha, beta):
    """Alternating product ``alpha ^ beta``.

    Each output coefficient is an exactly rounded sum (``math.fsum``) of
    signed products, so ``alpha ^ beta`` and ``(-1)**(kl) beta ^ alpha``
    agree bit for bit.
    """
    if alpha.dim != beta.dim:
        raise InvalidArgumentError(f"dimension mismatch: {alpha.dim} vs {beta.dim}")
    d, k, l = alpha.dim, alpha.degree, beta.degree
    if k + l > d:
        raise InvalidArgumentError(f"degree {k} + {l} exceeds dimension {d}")
    a, b = alpha.coeffs, beta.coeffs
    table = _wedge_table(d, k, l)
    out = np.array([math.fsum(s * a[i] * b[j] for i, j, s in terms) for terms in table])
    return KForm(d, k + l, out)


def wedge_power(alpha, n):
    """``alpha ^ alpha ^ ... ^ alpha`` (``n`` factors); ``n = 0`` gives the unit 0-form."""
    result = KForm(alpha.dim, 0, [1.0])
    for _ in range(n):
        result = wedge(result, alpha)
    return result


class CoefficientField:
    """A one-form field ``a_mu(x) dx^mu``.

    ``coefficients`` maps a list of ``dim`` coordinate jets to ``dim``
    coefficient jets (floats are accepted for constant coefficients).
    """

    def __init__(self, dim, coefficients):
        self.dim = dim
        self.coefficients = coefficients

    def _jets(self, at, order):
        at = np.asarray(at, dtype=float)
        if at.shape != (self.dim,):
            raise InvalidArgumentError(f"point must have {self.dim} coordinates, got {at.shape}")
        xs = ad.seed(at, order)
        out = list(self.coefficients(xs))
        if len(out) != self.dim:
            raise InvalidArgumentError(f"field returned {len(out)} coefficients, expected {self.dim}")
        return [y if isinstance(y, ad.Jet) else ad.constant(float(y), xs[0]) for y in out]

    def at(self, at):
        """The one-form at a point."""
        return KForm(self.dim, 1, [y.value for y in self._jets(at, 1)])

    def jacobian(self, at):
        """``J[nu, mu] = d a_nu / d x^mu``."""
        return np.stack([y.grad for y in self._jets(at, 1)])


def exterior_derivative(field, at):
    """``(d omega)_{mu nu} = d_mu a_nu - d_nu a_mu`` at ``at`` as a 2-form."""
    J = field.jacobian(at)
    tuples, _ = basis(field.dim, 2)
    return KForm(field.dim, 2, [J[nu, mu] - J[mu, nu] for mu, nu in tuples])


def nonintegrability_volume(eta, at, n):
    """Top coefficient of ``eta ^ (d eta)**n`` on a ``2n+1``-dimensional space."""
    if eta.dim != 2 * n + 1:
        raise InvalidArgumentError(f"a contact form on dimension {eta.dim} needs n = {(eta.dim - 1) / 2}, got {n}")
    one = eta.at(at)
    two = exterior_derivative(eta, at)
    top = wedge(one, wedge_power(two, n))
    return float(top.coeffs[0])
