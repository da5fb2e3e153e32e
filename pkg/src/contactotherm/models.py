"""Shipped models and the model registry.

Builtin models are addressed by a compact spec string,
``name:key=val,key=val``, e.g. ``two_level:eps=2`` or
``ising_ring:N=4,J=1,h=0``.  Matrix- or vector-valued parameters use JSON
literals (``quadratic:C=[[2,1],[1,2]],b=[0,0]``).
"""
import json
import math

import numpy as np

from .ensemble import Ensemble
from .errors import InvalidArgumentError, ModelFormatError

MAX_ISING_SITES = 20
_CHUNK = 1 << 16


def two_level(eps=2.0):
    """One observable taking the values ``0`` and ``eps``."""
    eps = float(eps)
    if eps == 0.0 or not math.isfinite(eps):
        raise InvalidArgumentError("two_level needs a finite, nonzero eps")
    return Ensemble.enumerated([[0.0], [eps]], names=("H",), label="two_level",
                               params={"eps": eps})


def _ising_observables(N, J, h):
    sites = np.arange(N)
    energy = np.empty(1 << N)
    magnet = np.empty(1 << N)
    for start in range(0, 1 << N, _CHUNK):
        states = np.arange(start, min(start + _CHUNK, 1 << N))
        spins = 2 * ((states[:, None] >> sites) & 1) - 1
        bonds = (spins * np.roll(spins, -1, axis=1)).sum(axis=1)
        m = spins.sum(axis=1)
        energy[states] = -J * bonds - h * m
        magnet[states] = m
    return np.column_stack([energy, magnet])


def ising_ring(N=4, J=1.0, h=0.0):
    """Periodic Ising chain of ``N`` spins, observables (energy, magnetization).

    Energy is ``-J sum s_i s_{i+1} - h sum s_i``.  All ``2**N`` configurations
    are enumerated; only the observable table is kept.
    """
    N = int(N)
    if not 2 <= N <= MAX_ISING_SITES:
        raise InvalidArgumentError(f"ising_ring supports 2 <= N <= {MAX_ISING_SITES}, got {N}")
    J, h = float(J), float(h)
    return Ensemble.enumerated(_ising_observables(N, J, h),
                               names=("energy", "magnetization"), label="ising_ring",
                               params={"N": N, "J": J, "h": h})


def quadratic(C=((2.0, 1.0), (1.0, 2.0)), b=None):
    """Gaussian-family model ``phi(I) = 1/2 I.C.I + b.I`` (``C`` positive definite)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[0]
    if C.shape != (n, n) or not np.allclose(C, C.T, rtol=0, atol=0):
        raise InvalidArgumentError("quadratic needs a symmetric square matrix C")
    try:
        np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError("quadratic needs a positive definite C") from None
    b = np.zeros(n) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (n,):
        raise InvalidArgumentError(f"b must have length {n}")
    Cl, bl = C.tolist(), b.tolist()

    def potential(I):
        total = 0.0
        for a in range(n):
            total = total + bl[a] * I[a]
            for c in range(n):
                if Cl[a][c] != 0.0:
                    total = total + (0.5 * Cl[a][c]) * (I[a] * I[c])
        return total

    return Ensemble.analytic(potential, n, names=tuple(f"x{a + 1}" for a in range(n)),
                             label="quadratic", params={"C": Cl, "b": bl})


def model_from_dict(doc, source="<model>"):
    """Build an enumerated ensemble from the JSON model document."""
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{source}: top level must be an object")
    for key in ("n", "microstates"):
        if key not in doc:
            raise ModelFormatError(f"{source}: missing field '{key}'")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ModelFormatError(f"{source}: field 'n' must be a positive integer, got {n!r}")
    names = doc.get("names")
    if names is not None:
        if not isinstance(names, list) or len(names) != n or not all(isinstance(x, str) for x in names):
            raise ModelFormatError(f"{source}: field 'names' must be a list of {n} strings")
    states = doc["microstates"]
    if not isinstance(states, list):
        raise ModelFormatError(f"{source}: field 'microstates' must be a list")
    H = np.empty((len(states), n))
    log_g = np.zeros(len(states))
    for i, rec in enumerate(states):
        where = f"{source}: microstates[{i}]"
        if not isinstance(rec, dict) or "H" not in rec:
            raise ModelFormatError(f"{where}: expected an object with field 'H'")
        row = rec["H"]
        if not isinstance(row, list) or len(row) != n:
            raise ModelFormatError(f"{where}.H: expected a list of {n} numbers")
        for a, val in enumerate(row):
            if not _is_number(val) or not math.isfinite(val):
                raise ModelFormatError(f"{where}.H[{a}]: expected a finite number, got {val!r}")
            H[i, a] = val
        if "log_g" in rec:
            val = rec["log_g"]
            if not _is_number(val) or not math.isfinite(val):
                raise ModelFormatError(f"{where}.log_g: expected a finite number, got {val!r}")
            log_g[i] = val
        extra = set(rec) - {"H", "log_g"}
        if extra:
            raise ModelFormatError(f"{where}: unknown field(s) {sorted(extra)}")
    try:
        return Ensemble.enumerated(H, log_g, names=names, label="file",
                                   params={"path": source})
    except InvalidArgumentError as exc:
        raise ModelFormatError(f"{source}: {exc}") from None


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def load_model_file(path):
    text = open(path, encoding="utf-8").read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return model_from_dict(doc, str(path))


REGISTRY = {
    "two_level": (two_level, {"eps": 2.0}),
    "ising_ring": (ising_ring, {"N": 4, "J": 1.0, "h": 0.0}),
    "quadratic": (quadratic, {"C": [[2.0, 1.0], [1.0, 2.0]], "b": None}),
    "file": (load_model_file, {"path": None}),
}


def _split_top_level(text):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    return parts


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_model_spec(spec):
    """Parse ``name:key=val,...`` into ``(name, params)``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in REGISTRY:
        raise InvalidArgumentError(f"unknown model {name!r}; known models: {', '.join(sorted(REGISTRY))}")
    defaults = REGISTRY[name][1]
    params = {}
    for item in _split_top_level(rest) if rest else []:
        key, eq, raw = item.partition("=")
        key = key.strip()
        if not eq:
            raise InvalidArgumentError(f"model parameter {item!r} is not of the form key=value")
        if key not in defaults:
            raise InvalidArgumentError(f"model {name!r} has no parameter {key!r}; expected one of {sorted(defaults)}")
        params[key] = _parse_value(raw.strip())
    return name, params


def build_model(spec):
    name, params = parse_model_spec(spec)
    factory, defaults = REGISTRY[name]
    if name == "file":
        if "path" not in params:
            raise InvalidArgumentError("file model needs path=<model.json>")
        return factory(str(params["path"]))
    kwargs = dict(defaults)
    kwargs.update(params)
    return factory(**kwargs)
