"""Reparametrizations of the intensive and extensive variables.

A reparametrization is ``I~ = M_I f(I)`` and ``E~ = M_E h(E)``: a
coordinate-wise smooth monotone map followed by an optional constant
invertible linear mix.  Invertibility is constructive: the determinant of the
Jacobian is ``det(M) * prod f'``.
"""
from dataclasses import dataclass
import json
import math

import numpy as np
from scipy.optimize import brentq

from . import autodiff as ad
from .errors import InvalidArgumentError, ModelFormatError, SingularityError

#: ``|det|`` at or below this is treated as a singular Jacobian
SINGULAR_TOL = 1e-10

KINDS = ("affine", "exp", "ln", "tanh_affine", "odd_power")
#: kinds whose image is the whole real line, so every E~ value has a preimage
SURJECTIVE_KINDS = ("affine", "ln", "tanh_affine", "odd_power")


class ScalarMap:
    """A smooth invertible map of one real variable.

    ``forward`` and ``derivative`` accept floats or jets; ``inverse`` accepts
    floats.
    """

    def __init__(self, kind, params, forward, derivative, inverse):
        self.kind = kind
        self.params = dict(params)
        self.forward = forward
        self.derivative = derivative
        self.inverse = inverse

    def __call__(self, x):
        return self.forward(x)

    def to_dict(self):
        return {"kind": self.kind, "params": self.params}

    def __repr__(self):
        return f"ScalarMap({self.kind!r}, {self.params!r})"

    @classmethod
    def identity(cls):
        return cls.affine(1.0, 0.0)

    @classmethod
    def custom(cls, forward, derivative, inverse, label="custom"):
        return cls(label, {}, forward, derivative, inverse)

    @classmethod
    def affine(cls, a=1.0, b=0.0):
        a, b = float(a), float(b)
        if a == 0.0:
            raise InvalidArgumentError("affine map needs a != 0")
        return cls("affine", {"a": a, "b": b},
                   lambda x: a * x + b,
                   lambda x: a + 0.0 * x,
                   lambda y: (y - b) / a)

    @classmethod
    def exp(cls, a=1.0, c=1.0, b=0.0):
        """``c * exp(a x) + b``."""
        a, c, b = float(a), float(c), float(b)
        if a == 0.0 or c == 0.0:
            raise InvalidArgumentError("exp map needs a != 0 and c != 0")

        def inverse(y):
            z = (y - b) / c
            if z <= 0:
                raise SingularityError(f"exp map: value {y} outside the image")
            return math.log(z) / a

        return cls("exp", {"a": a, "c": c, "b": b},
                   lambda x: c * ad.exp(a * x) + b,
                   lambda x: (c * a) * ad.exp(a * x),
                   inverse)

    @classmethod
    def ln(cls, a=1.0, b=0.0, c=1.0):
        """``c * ln(a x + b)`` on ``a x + b > 0``."""
        a, b, c = float(a), float(b), float(c)
        if a == 0.0 or c == 0.0:
            raise InvalidArgumentError("ln map needs a != 0 and c != 0")
        def inverse(y):
            try:
                return (math.exp(y / c) - b) / a
            except OverflowError:
                raise SingularityError(f"ln map: preimage of {y} overflows") from None

        return cls("ln", {"a": a, "b": b, "c": c},
                   lambda x: c * ad.log(a * x + b),
                   lambda x: (c * a) / (a * x + b),
                   inverse)

    @classmethod
    def tanh_affine(cls, c=0.5, a=1.0, d=1.0):
        """``c * tanh(a x) + d x``; globally monotone when ``d > 0`` and ``d + c a > 0``."""
        c, a, d = float(c), float(a), float(d)
        if not (d > 0 and d + c * a > 0):
            raise InvalidArgumentError("tanh_affine needs d > 0 and d + c*a > 0 for invertibility")

        def f(x):
            return c * ad.tanh(a * x) + d * x

        def df(x):
            t = ad.tanh(a * x)
            return (c * a) * (1.0 - t * t) + d

        def inverse(y):
            lo, hi = (y - abs(c)) / d, (y + abs(c)) / d
            if lo == hi:
                return lo
            x = brentq(lambda s: f(s) - y, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return x - (f(x) - y) / df(x)

        return cls("tanh_affine", {"c": c, "a": a, "d": d}, f, df, inverse)

    @classmethod
    def odd_power(cls, eps=1.0):
        """``x**3 + eps x`` (``eps >= 0``; ``eps = 0`` is singular at the origin)."""
        eps = float(eps)
        if eps < 0:
            raise InvalidArgumentError("odd_power needs eps >= 0 for invertibility")

        def f(x):
            return x * x * x + eps * x

        def df(x):
            return 3.0 * (x * x) + eps

        def inverse(y):
            # Cardano: the single real root of x^3 + eps x - y
            q = math.sqrt(y * y / 4.0 + eps ** 3 / 27.0)
            x = np.cbrt(y / 2.0 + q) + np.cbrt(y / 2.0 - q)
            for _ in range(2):
                slope = df(x)
                if slope == 0.0:
                    break
                x -= (f(x) - y) / slope
            return float(x)

        return cls("odd_power", {"eps": eps}, f, df, inverse)

    @classmethod
    def from_dict(cls, doc, where="map"):
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ModelFormatError(f"{where}: expected an object with field 'kind'")
        kind = doc["kind"]
        params = doc.get("params", {})
        if kind not in KINDS:
            raise ModelFormatError(f"{where}.kind: unknown map kind {kind!r}; expected one of {list(KINDS)}")
        if not isinstance(params, dict):
            raise ModelFormatError(f"{where}.params: expected an object")
        try:
            return getattr(cls, kind)(**{k: float(v) for k, v in params.items()})
        except TypeError as exc:
            raise ModelFormatError(f"{where}.params: {exc}") from None
        except InvalidArgumentError as exc:
            raise ModelFormatError(f"{where}: {exc}") from None


def _check_mix(mix, n, name):
    if mix is None:
        return None
    mix = np.asarray(mix, dtype=float)
    if mix.shape != (n, n):
        raise InvalidArgumentError(f"{name} must be {n}x{n}, got shape {mix.shape}")
    if abs(np.linalg.det(mix)) <= SINGULAR_TOL:
        raise SingularityError(f"{name} is singular (det = {np.linalg.det(mix):.3e})")
    return mix


def _apply(maps, mix, xs):
    ys = [m(x) for m, x in zip(maps, xs)]
    if mix is None:
        return ys
    n = len(ys)
    out = []
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if mix[i, j] != 0.0:
                acc = acc + mix[i, j] * ys[j]
        out.append(acc)
    return out


def _invert(maps, mix, ys):
    ys = np.asarray(ys, dtype=float)
    if mix is not None:
        ys = np.linalg.solve(mix, ys)
    return np.array([m.inverse(float(y)) for m, y in zip(maps, ys)])


def _jacobian(maps, mix, xs, label):
    xs = np.asarray(xs, dtype=float)
    d = np.array([float(m.derivative(float(x))) for m, x in zip(maps, xs)])
    jac = np.diag(d) if mix is None else mix * d[None, :]
    det = np.linalg.det(jac)
    if not abs(det) > SINGULAR_TOL:
        raise SingularityError(f"{label} Jacobian is singular at {xs.tolist()} (det = {det:.3e})")
    return jac


@dataclass(frozen=True)
class Reparametrization:
    """``I~ = i_mix . f(I)`` and ``E~ = e_mix . h(E)``; ``None`` mixes mean identity."""

    i_maps: tuple
    e_maps: tuple
    i_mix: np.ndarray = None
    e_mix: np.ndarray = None

    def __post_init__(self):
        n = len(self.i_maps)
        if len(self.e_maps) != n:
            raise InvalidArgumentError("i_map and e_map must have the same length")
        object.__setattr__(self, "i_maps", tuple(self.i_maps))
        object.__setattr__(self, "e_maps", tuple(self.e_maps))
        object.__setattr__(self, "i_mix", _check_mix(self.i_mix, n, "mix"))
        object.__setattr__(self, "e_mix", _check_mix(self.e_mix, n, "e_mix"))

    @classmethod
    def identity(cls, n):
        return cls(tuple(ScalarMap.identity() for _ in range(n)),
                   tuple(ScalarMap.identity() for _ in range(n)))

    @property
    def n(self):
        return len(self.i_maps)

    @property
    def is_diagonal(self):
        return all(m is None or np.count_nonzero(m - np.diag(np.diag(m))) == 0
                   for m in (self.i_mix, self.e_mix))

    @property
    def is_identity(self):
        ident = all(m.kind == "affine" and m.params == {"a": 1.0, "b": 0.0}
                    for m in self.i_maps + self.e_maps)
        return ident and self.i_mix is None and self.e_mix is None

    @property
    def i_is_affine(self):
        return all(m.kind == "affine" for m in self.i_maps)

    def i_forward(self, I):
        return _apply(self.i_maps, self.i_mix, I)

    def e_forward(self, E):
        return _apply(self.e_maps, self.e_mix, E)

    def i_inverse(self, I_tilde):
        return _invert(self.i_maps, self.i_mix, I_tilde)

    def e_inverse(self, E_tilde):
        return _invert(self.e_maps, self.e_mix, E_tilde)

    def i_jacobian(self, I):
        """``Lambda[a~, a] = d I~^{a~} / d I^a``; raises on a singular Jacobian."""
        return _jacobian(self.i_maps, self.i_mix, I, "intensive")

    def e_jacobian(self, E):
        """``d E~_{a~} / d E_b``; raises on a singular Jacobian."""
        return _jacobian(self.e_maps, self.e_mix, E, "extensive")

    def i_jacobian_jets(self, I_jets):
        """Entries of ``Lambda`` as jets in whatever ``I_jets`` are seeded on."""
        d = [m.derivative(x) for m, x in zip(self.i_maps, I_jets)]
        n = self.n
        if self.i_mix is None:
            return [[d[a] if a == b else 0.0 for a in range(n)] for b in range(n)]
        return [[self.i_mix[b, a] * d[a] for a in range(n)] for b in range(n)]

    def i_second_derivatives(self, I):
        """``D[a~, a, c] = d^2 I~^{a~} / d I^a d I^c``."""
        outs = self.i_forward(ad.seed(I, 2))
        return np.stack([o.hess if isinstance(o, ad.Jet) else np.zeros((self.n, self.n))
                         for o in outs])

    def to_dict(self):
        doc = {"i_map": [m.to_dict() for m in self.i_maps],
               "e_map": [m.to_dict() for m in self.e_maps]}
        if self.i_mix is not None:
            doc["mix"] = self.i_mix.tolist()
        if self.e_mix is not None:
            doc["e_mix"] = self.e_mix.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc, n, source="<reparam>"):
        if not isinstance(doc, dict):
            raise ModelFormatError(f"{source}: top level must be an object")
        unknown = set(doc) - {"i_map", "e_map", "mix", "e_mix"}
        if unknown:
            raise ModelFormatError(f"{source}: unknown field(s) {sorted(unknown)}")
        blocks = {}
        for key in ("i_map", "e_map"):
            entries = doc.get(key)
            if entries is None:
                blocks[key] = tuple(ScalarMap.identity() for _ in range(n))
                continue
            if not isinstance(entries, list) or len(entries) != n:
                raise ModelFormatError(f"{source}: field '{key}' must list {n} maps")
            blocks[key] = tuple(ScalarMap.from_dict(e, f"{source}: {key}[{i}]")
                                for i, e in enumerate(entries))
        mixes = {}
        for key in ("mix", "e_mix"):
            m = doc.get(key)
            if m is not None:
                arr = np.asarray(m, dtype=float)
                if arr.shape != (n, n):
                    raise ModelFormatError(f"{source}: field '{key}' must be a {n}x{n} matrix")
                mixes[key] = arr
        return cls(blocks["i_map"], blocks["e_map"], mixes.get("mix"), mixes.get("e_mix"))

    @classmethod
    def from_json(cls, text, n, source="<reparam>"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc, n, source)


def _random_map(rng, kind, box):
    s = 1.0 / max(box, 1e-12)
    sign = rng.choice([-1.0, 1.0])
    if kind == "affine":
        return ScalarMap.affine(sign * rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
    if kind == "exp":
        return ScalarMap.exp(sign * rng.uniform(0.3, 1.0) * s,
                             rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0),
                             rng.uniform(-1.0, 1.0))
    if kind == "ln":
        a = sign * rng.uniform(0.5, 2.0) * s
        return ScalarMap.ln(a, abs(a) * box + rng.uniform(0.5, 1.5),
                            rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0) * max(box, 1.0))
    if kind == "tanh_affine":
        a = rng.uniform(0.5, 2.0) * s
        d = rng.uniform(0.5, 1.5)
        return ScalarMap.tanh_affine(rng.uniform(-0.8, 1.0) * d / a, a, d)
    if kind == "odd_power":
        return ScalarMap.odd_power(rng.uniform(0.5, 2.0))
    raise InvalidArgumentError(f"unknown map kind {kind!r}")


def random_mix(rng, n):
    """A well-conditioned invertible matrix: orthogonal times a mild diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return q @ np.diag(rng.uniform(0.7, 1.4, size=n))


def random_reparametrization(rng, n, i_box=1.0, e_box=1.0, i_kinds=KINDS,
                             e_kinds=SURJECTIVE_KINDS, mix_probability=0.5):
    """Draw a reparametrization from the shipped library.

    Map parameters are scaled so that ``|I| <= i_box`` and ``|E| <= e_box``
    stay inside every map's domain.  Extensive maps default to surjective
    kinds: the reparametrized embedding needs a preimage for every ``E~``.
    """
    i_kinds, e_kinds = list(i_kinds), list(e_kinds)
    i_maps = tuple(_random_map(rng, i_kinds[rng.integers(len(i_kinds))], i_box) for _ in range(n))
    e_maps = tuple(_random_map(rng, e_kinds[rng.integers(len(e_kinds))], e_box) for _ in range(n))
    i_mix = random_mix(rng, n) if n > 1 and rng.random() < mix_probability else None
    e_mix = random_mix(rng, n) if n > 1 and rng.random() < mix_probability else None
    return Reparametrization(i_maps, e_maps, i_mix, e_mix)
