"""Command-line interface.

Every command prints one report (JSON by default, CSV with ``--format csv``)
on standard output.  Exit codes: 0 on success, 2 when a verification fails,
1 on usage or domain errors (one line on standard error).
"""
import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import curvature_scalar
from .ensemble import covariance_metric, mc_covariance, massieu_hessian
from .errors import ContactothermError, InvalidArgumentError
from .exterior import nonintegrability_volume
from .maxent import solve_targets
from .models import REGISTRY, build_model
from .phase_space import (FIRST_LAW_TOL, INVARIANCE_TOL, RUPPEINER_TOL, LegendrePartition,
                          PhasePoint, embed, eta1, eta1_field, eta2_field, legendre_pullback_eta,
                          metric_G, pullback, ruppeiner_check, t_tensor, verify_invariance_chain)
from .reparam import Reparametrization, random_reparametrization

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
I_BOX = 1.0
CONTACT_DET_MIN = 0.1
LEGENDRE_TOL = 1e-12
METRIC_AGREEMENT_TOL = 1e-12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# output ---------------------------------------------------------------------

def _plain(x):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _fmt_float(x):
    if math.isnan(x) or math.isinf(x):
        return "null"
    text = format(x, ".17g")
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def to_json(x, indent=0):
    """JSON text with insertion-ordered keys and 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(k)}: {to_json(v, indent + 1)}" for k, v in x.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(x, list):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in x):
            return "[" + ", ".join(to_json(v) for v in x) + "]"
        body = ",\n".join(inner + to_json(v, indent + 1) for v in x)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return json.dumps(x)
    if isinstance(x, float):
        return _fmt_float(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(value, list) and any(isinstance(v, (list, dict)) for v in value):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            out[f"{prefix}[{i}]"] = v
    else:
        out[prefix] = value


def to_csv(rows):
    """Header row plus one row per point; nested values are flattened."""
    flat = []
    for row in rows:
        out = {}
        _flatten("", row, out)
        flat.append(out)
    header = []
    for row in flat:
        for k in row:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in flat:
        cells = []
        for k in header:
            v = row.get(k, "")
            if isinstance(v, float):
                v = _fmt_float(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif v is None:
                v = "null"
            cells.append(v)
        writer.writerow(cells)
    return buf.getvalue()


def make_report(command, model, results, passed=None, max_delta=None, tolerances=None, seed=None):
    report = {"command": command, "model": model, "results": results}
    if passed is not None:
        report["pass"] = bool(passed)
    if max_delta is not None:
        report["max_delta"] = float(max_delta)
    report["tolerances"] = tolerances or {}
    if seed is not None:
        report["seed"] = int(seed)
    return _plain(report)


# argument helpers -----------------------------------------------------------

def parse_point(text, n, what="--at"):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidArgumentError(f"{what}: malformed point {text!r}; expected comma-separated numbers") from None
    if len(values) != n:
        raise InvalidArgumentError(f"{what}: expected {n} comma-separated values for this model, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise InvalidArgumentError(f"{what}: values must be finite")
    return np.array(values)


def parse_grid(text, n):
    """``lo:hi:steps``; ``lo`` and ``hi`` are comma lists for ``n > 1``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidArgumentError(f"--grid: expected lo:hi:steps, got {text!r}")
    lo = parse_point(parts[0], n, "--grid lo")
    hi = parse_point(parts[1], n, "--grid hi")
    try:
        steps = int(parts[2])
    except ValueError:
        raise InvalidArgumentError(f"--grid: steps must be an integer, got {parts[2]!r}") from None
    if steps < 1:
        raise InvalidArgumentError("--grid: steps must be >= 1")
    t = np.linspace(0.0, 1.0, steps) if steps > 1 else np.zeros(1)
    return lo[None, :] + t[:, None] * (hi - lo)[None, :]


def load_reparam(spec, n):
    if spec is None:
        return None
    text = spec.strip()
    if text.startswith("{"):
        return Reparametrization.from_json(text, n, "--reparam")
    path = Path(spec)
    try:
        content = path.read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"--reparam: cannot read {spec}: {exc.strerror}") from None
    return Reparametrization.from_json(content, n, str(path))


def resolve_threads(value):
    if value is None:
        env = os.environ.get("CONTACTOTHERM_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise InvalidArgumentError(f"CONTACTOTHERM_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise InvalidArgumentError("--threads must be >= 1")
    return value


def point_rngs(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def sweep(fn, items, threads):
    """``[fn(x) for x in items]``, optionally on a thread pool (order kept)."""
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _model(args):
    if args.model and args.model_file:
        raise InvalidArgumentError("give either --model or --model-file, not both")
    if args.model_file:
        return build_model(f"file:path={args.model_file}")
    if not args.model:
        raise InvalidArgumentError("a model is required: --model NAME[:key=val,...] or --model-file PATH")
    return build_model(args.model)


def _pairwise(named):
    names = list(named)
    out = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            out[f"{a}~{b}"] = float(np.max(np.abs(named[a] - named[b])))
    return out


# commands -------------------------------------------------------------------

def cmd_models(args):
    rows = []
    for name, (factory, defaults) in REGISTRY.items():
        rows.append({"name": name, "defaults": dict(defaults),
                     "description": (factory.__doc__ or "").strip().splitlines()[0] if factory.__doc__ else ""})
    return make_report("models list", None, {"models": rows}), rows, EXIT_OK


def cmd_metric(args):
    ens = _model(args)
    I = parse_point(args.at, ens.n)
    rep = load_reparam(args.reparam, ens.n)
    _, _, H = massieu_hessian(ens, I)
    point, tangent = embed(ens, I)
    named = {"hessian": H, "pullback": pullback(metric_G(point), tangent)}
    if ens.is_enumerated:
        named["covariance"] = covariance_metric(ens, I)
    if rep is not None:
        p2, t2 = embed(ens, I, rep)
        named["pullback_G2"] = pullback(metric_G(p2, rep), t2)
        named["pullback_t2"] = pullback(t_tensor(p2, rep), t2)
    deltas = _pairwise(named)
    results = {"I": I, "g": named, "deltas": deltas}
    row = {"I": I}
    row.update({k: v for k, v in named.items()})
    return (make_report("metric", ens.describe(), results, max_delta=max(deltas.values()),
                        tolerances={"agreement": METRIC_AGREEMENT_TOL}),
            [row], EXIT_OK)


def _invariance_point(ens, rep, e_box):
    def run(rng):
        I = rng.uniform(-I_BOX, I_BOX, ens.n)
        r = rep if rep is not None else random_reparametrization(rng, ens.n, I_BOX, e_box)
        rpt = verify_invariance_chain(ens, I, r)
        ok = (rpt.passed and rpt.first_law_eta1 <= FIRST_LAW_TOL and rpt.first_law_eta2 <= FIRST_LAW_TOL)
        return {"I": I, "reparam": r.to_dict(), "max_delta": rpt.max_delta,
                "first_law_eta1": rpt.first_law_eta1, "first_law_eta2": rpt.first_law_eta2,
                "chart_correction": rpt.chart_correction, "pass": ok}
    return run


def _contact_point(n, rep, e_box):
    fact = math.factorial(n)
    f1 = eta1_field(n)

    def run(rng):
        r = rep if rep is not None else random_reparametrization(rng, n, I_BOX, e_box)
        x = np.concatenate([[rng.uniform(-1.0, 1.0)], rng.uniform(-e_box, e_box, n),
                            rng.uniform(-I_BOX, I_BOX, n)])
        v1 = nonintegrability_volume(f1, x, n)
        v2 = nonintegrability_volume(eta2_field(r), x, n)
        det_lam = float(np.linalg.det(r.i_jacobian(x[1 + n:])))
        checked = abs(det_lam) >= CONTACT_DET_MIN
        ok = abs(v1) >= 0.5 * fact and (not checked or abs(v2) >= 0.5 * fact)
        return {"x": x, "reparam": r.to_dict(), "volume_eta1": v1, "volume_eta2": v2,
                "det_lambda": det_lam, "eta2_checked": checked, "pass": ok}
    return run


def _legendre_point(n, e_box):
    parts = LegendrePartition.all(n)

    def run(rng):
        x = np.concatenate([[rng.uniform(-1.0, 1.0)], rng.uniform(-e_box, e_box, n),
                            rng.uniform(-I_BOX, I_BOX, n)])
        at = PhasePoint.from_coords(x)
        base = eta1(at).coeffs
        devs = [float(np.max(np.abs(legendre_pullback_eta(at, p) - base))) for p in parts]
        return {"x": x, "max_delta": max(devs), "per_partition": devs,
                "pass": max(devs) <= LEGENDRE_TOL}
    return run


def cmd_verify(args):
    threads = resolve_threads(args.threads)
    if args.points < 1:
        raise InvalidArgumentError("--points must be >= 1")
    what = args.what
    if what == "invariance" or args.n is None:
        ens = _model(args)
        n = ens.n
        model = ens.describe()
        e_box = ens.extensive_bound(I_BOX)
    else:
        ens, n, model, e_box = None, args.n, {"name": "phase_space", "n": args.n}, 1.0
        if args.model or args.model_file:
            ens = _model(args)
            if ens.n != n:
                raise InvalidArgumentError(f"--n {n} does not match the model's n = {ens.n}")
            model, e_box = ens.describe(), ens.extensive_bound(I_BOX)
    if n < 1:
        raise InvalidArgumentError("--n must be >= 1")
    rep = load_reparam(args.reparam, n) if what != "legendre" else None
    rngs = point_rngs(args.seed, args.points)
    if what == "invariance":
        rows = sweep(_invariance_point(ens, rep, e_box), rngs, threads)
        max_delta = max(r["max_delta"] for r in rows)
        tol = {"invariance": INVARIANCE_TOL, "first_law": FIRST_LAW_TOL}
        summary = {"max_first_law_eta1": max(r["first_law_eta1"] for r in rows),
                   "max_first_law_eta2": max(r["first_law_eta2"] for r in rows),
                   "max_chart_correction": max(r["chart_correction"] for r in rows)}
    elif what == "contact":
        rows = sweep(_contact_point(n, rep, e_box), rngs, threads)
        fact = math.factorial(n)
        checked = [abs(r["volume_eta2"]) for r in rows if r["eta2_checked"]]
        summary = {"n": n, "n_factorial": fact,
                   "min_volume_eta1": min(abs(r["volume_eta1"]) for r in rows),
                   "min_volume_eta2_checked": min(checked) if checked else None,
                   "eta2_points_checked": len(checked)}
        # shortfall below the 0.5 n! bound, zero when every point clears it
        max_delta = max(0.0, 0.5 * fact - summary["min_volume_eta1"],
                        (0.5 * fact - min(checked)) if checked else 0.0)
        tol = {"min_volume_fraction": 0.5, "det_lambda_min": CONTACT_DET_MIN}
    else:
        rows = sweep(_legendre_point(n, e_box), rngs, threads)
        max_delta = max(r["max_delta"] for r in rows)
        tol = {"legendre": LEGENDRE_TOL}
        summary = {"n": n, "partitions": 1 << n}
    passed = all(r["pass"] for r in rows)
    results = {"summary": summary, "points": rows}
    report = make_report(f"verify {what}", model, results, passed, max_delta, tol, args.seed)
    return report, rows, EXIT_OK if passed else EXIT_FAILED


def cmd_maxent(args):
    ens = _model(args)
    targets = parse_point(args.targets, ens.n, "--targets")
    res = solve_targets(ens, targets)
    results = {"targets": targets, "I": res.I, "phi": res.phi, "entropy": res.entropy,
               "iterations": res.iterations, "residual": res.residual}
    return make_report("maxent", ens.describe(), results), [results], EXIT_OK


def cmd_sample(args):
    ens = _model(args)
    I = parse_point(args.at, ens.n)
    cov, stderr = mc_covariance(ens, I, args.samples, args.seed)
    exact = covariance_metric(ens, I)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(cov - exact) / stderr
    results = {"I": I, "samples": args.samples, "covariance": cov, "stderr": stderr,
               "exact": exact, "z": z}
    return make_report("sample", ens.describe(), results, seed=args.seed), [results], EXIT_OK


def cmd_curvature(args):
    ens = _model(args)
    I = parse_point(args.at, ens.n)
    results = {"I": I, "scalar_curvature": curvature_scalar(ens, I)}
    return make_report("curvature", ens.describe(), results), [results], EXIT_OK


def cmd_ruppeiner(args):
    ens = _model(args)
    grid = parse_grid(args.grid, ens.n)
    rpt = ruppeiner_check(ens, grid)
    rows = [{"E": E, "I": I, "transported": T, "minus_entropy_hessian": R, "rel_deviation": d}
            for E, I, T, R, d in zip(rpt.E_grid, rpt.I_grid, rpt.transported,
                                     rpt.entropy_hessian, rpt.rel_deviation)]
    results = {"points": rows}
    report = make_report("ruppeiner", ens.describe(), results, rpt.passed, rpt.max_rel_deviation,
                         {"relative": RUPPEINER_TOL})
    return report, rows, EXIT_OK if rpt.passed else EXIT_FAILED


# parser ---------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="contactotherm", description="Contact geometry of equilibrium statistical models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--model", help="builtin model, e.g. ising_ring:N=4,J=1,h=0")
    common.add_argument("--model-file", help="JSON model file")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for point sweeps (default: $CONTACTOTHERM_THREADS or 1)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    models = sub.add_parser("models", help="list builtin models")
    models.add_argument("action", choices=("list",))
    models.add_argument("--format", choices=("json", "csv"), default="json")
    models.set_defaults(func=cmd_models)

    metric = sub.add_parser("metric", parents=[common], help="equilibrium metric at a point")
    metric.add_argument("--at", required=True)
    metric.add_argument("--reparam", help="reparametrization JSON file or inline JSON")
    metric.set_defaults(func=cmd_metric)

    verify = sub.add_parser("verify", parents=[common], help="run a verification sweep")
    verify.add_argument("what", choices=("invariance", "contact", "legendre"))
    verify.add_argument("--reparam", help="fixed reparametrization (default: random per point)")
    verify.add_argument("--points", type=int, default=100)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--n", type=int, default=None,
                        help="phase-space half dimension for contact/legendre without a model")
    verify.set_defaults(func=cmd_verify)

    maxent = sub.add_parser("maxent", parents=[common], help="multipliers for target averages")
    maxent.add_argument("--targets", required=True)
    maxent.set_defaults(func=cmd_maxent)

    sample = sub.add_parser("sample", parents=[common], help="Monte Carlo covariance")
    sample.add_argument("--at", required=True)
    sample.add_argument("--samples", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.set_defaults(func=cmd_sample)

    curv = sub.add_parser("curvature", parents=[common], help="scalar curvature of the metric")
    curv.add_argument("--at", required=True)
    curv.set_defaults(func=cmd_curvature)

    rup = sub.add_parser("ruppeiner", parents=[common], help="Legendre-transported metric vs -Hess S")
    rup.add_argument("--grid", required=True, help="lo:hi:steps over E")
    rup.set_defaults(func=cmd_ruppeiner)
    return p


VALUE_OPTIONS = ("--at", "--targets", "--grid")


def _glue_values(argv):
    """Attach values such as ``-1,0.5`` to their option so they are not read as flags."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in VALUE_OPTIONS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(_glue_values(list(argv)))
        if args.command is None:
            raise UsageError("a command is required (models, metric, verify, maxent, sample, curvature, ruppeiner)")
        report, rows, code = args.func(args)
    except UsageError as exc:
        print(f"contactotherm: usage error: {exc}", file=stderr)
        return EXIT_ERROR
    except (ContactothermError, ValueError, ArithmeticError, TypeError, np.linalg.LinAlgError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"contactotherm: error: {msg}", file=stderr)
        return EXIT_ERROR
    if args.format == "csv":
        stdout.write(to_csv(_plain(rows)))
    else:
        stdout.write(to_json(report) + "\n")
    return code


def main(argv=None):
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
