"""Command-line front end: ``discrete-xp {verify,eval,sweep,search,geometry}``.

Outputs are deterministic functions of their arguments.  The only
nondeterministic datum, the wall-clock timestamp, lives in a sidecar
``<output>.manifest.json`` that each output file references by name.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from . import inequalities as ineq
from . import search
from . import torus as tor
from . import verify
from . import walsh as w

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    outputs: list = field(default_factory=list)


def manifest_path(output: str | Path) -> Path:
    return Path(str(output) + ".manifest.json")


def _write_manifest(manifest: RunManifest):
    for out in manifest.outputs:
        manifest_path(out).write_text(json.dumps(asdict(manifest), sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# argument parsing helpers

def _scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_range(text: str) -> list:
    """``lo..hi[:step]`` (inclusive) and comma lists of either, e.g. ``2,4..8:2``."""
    values = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            span, _, step = part.partition(":")
            lo, hi = (_scalar(x) for x in span.split("..", 1))
            step = _scalar(step) if step else 1
            if step <= 0:
                raise UsageError(f"range step must be positive in {part!r}")
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            if count <= 0:
                raise UsageError(f"empty range {part!r}")
            values += [lo + i * step for i in range(count)]
        else:
            values.append(_scalar(part))
    if not values:
        raise UsageError(f"empty grid {text!r}")
    return sorted(set(values))


def _single(values: list, flag: str):
    if len(values) != 1:
        raise UsageError(f"{flag} takes a single value for this command")
    return values[0]


def _kv_params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"parameter {item!r} must look like key=value")
        out[key.replace("-", "_")] = [_scalar(v) for v in val.split(",")] if "," in val else _scalar(val)
    return out


def _subset(text: str | None, n: int) -> int:
    if text is None or text == "all":
        return w.full_mask(n)
    if text in ("", "none"):
        return 0
    return w.subset_mask([int(x) for x in text.split(",")], n)


def _coeffs(text: str, n: int) -> np.ndarray:
    if text == "ones":
        return np.ones(n)
    if text == "e1":
        return np.eye(n)[0]
    a = np.array([float(x) for x in text.split(",")])
    if a.size != n:
        raise UsageError(f"--a has {a.size} entries but --n is {n}")
    return a


def cube_input(spec: str, n: int, seed: int | None) -> w.CubeFunction:
    """``character:1,3`` | ``linear:<a>`` | ``random`` (mean-zero, uses --seed) | JSON file path."""
    kind, _, arg = spec.partition(":")
    if kind == "character":
        return w.walsh_character(n, [int(x) for x in arg.split(",")] if arg else [])
    if kind == "linear":
        return w.CubeFunction(n, search.lift_linear(_coeffs(arg, n)))
    if kind == "random":
        if seed is None:
            raise UsageError("--h random needs --seed")
        return w.random_cube_function(n, np.random.default_rng(seed), mean_zero=True)
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"unknown cube input {spec!r}")
    obj = w.from_json(path.read_text())
    h = obj if isinstance(obj, w.CubeFunction) else w.inverse_walsh_transform(obj)
    if h.n != n:
        raise UsageError(f"input file has n={h.n} but --n is {n}")
    return h


def torus_input(args, r: int, n: int) -> tor.TorusFunction:
    if args.input:
        try:
            f = tor.TorusFunction.from_json(Path(args.input).read_text())
        except OSError as exc:
            raise UsageError(str(exc)) from None
        if (f.r, f.n) != (r, n):
            raise UsageError(f"input file has (r, n) = ({f.r}, {f.n}) but flags give ({r}, {n})")
        return f
    params = _kv_params(args.f_param)
    if args.f in ("random", "random-trig"):
        params.setdefault("seed", args.seed if args.seed is not None else 0)
    try:
        return tor.make_generator(args.f, r, n, **params)
    except TypeError as exc:
        raise UsageError(f"bad generator parameters: {exc}") from None


# ---------------------------------------------------------------------------
# eval

EVALUATORS = (
    "linear-xp", "chaos-xp", "metric-xp", "smoothed-xp", "square-function",
    "randomized-riesz", "jensen", "inverse-laplacian-probe", "ts-perturbation",
)


def _mode(args) -> str:
    if args.mode == "exact":
        return "exact"
    if args.seed is None:
        raise UsageError("Monte Carlo mode requires --seed")
    return "monte_carlo"


def evaluate(name: str, args, point: dict) -> ineq.InequalityReport:
    """One report at a grid point (``point`` maps flag names to scalars)."""
    point = {a: (float(v) if a in ("p", "alpha") and v is not None else v) for a, v in point.items()}
    n, k, p = point.get("n"), point.get("k"), point.get("p")
    need = {"linear-xp": "nkp", "chaos-xp": "nkp", "metric-xp": "nkpr", "smoothed-xp": "nkpr",
            "square-function": "np", "randomized-riesz": "np", "jensen": "np", "inverse-laplacian-probe": "np",
            "ts-perturbation": "npr"}[name]
    for flag in need:
        if point.get(flag) is None:
            raise UsageError(f"{name} needs --{flag}")
    if name == "linear-xp":
        return ineq.linear_xp(_coeffs(args.a, n), p, k)
    if name == "chaos-xp":
        return ineq.chaos_xp(cube_input(args.h, n, args.seed), p, k, refined=args.refined)
    if name in ("metric-xp", "smoothed-xp"):
        f = torus_input(args, point["r"], n)
        fn = ineq.metric_xp if name == "metric-xp" else ineq.smoothed_xp
        return fn(f, p, k, _mode(args), args.budget, args.seed, theorem_scaling=not args.generic_scaling)
    if name == "square-function":
        return ineq.lust_piquard_square(cube_input(args.h, n, args.seed), p)
    if name == "randomized-riesz":
        return ineq.randomized_riesz(cube_input(args.h, n, args.seed), p, _subset(args.S, n), _mode(args),
                                     args.budget, args.seed)
    if name == "jensen":
        if point.get("alpha") is None:
            raise UsageError("jensen needs --alpha")
        return ineq.jensen_contraction(cube_input(args.h, n, args.seed), _subset(args.S, n), point["alpha"], p)
    if name == "inverse-laplacian-probe":
        if point.get("alpha") is None:
            raise UsageError("inverse-laplacian-probe needs --alpha")
        return ineq.inverse_laplacian_probe(p, point["alpha"], n)
    f = torus_input(args, point["r"], n)
    return ineq.ts_perturbation(f, _subset(args.S, n), p)


GRID_AXES = ("n", "k", "p", "r", "alpha")


def _grid(args) -> list[dict]:
    axes = {a: parse_range(getattr(args, a)) if getattr(args, a) is not None else [None] for a in GRID_AXES}
    points = [dict(zip(GRID_AXES, combo)) for combo in itertools.product(*axes.values())]
    # k > n combinations are skipped rather than reported as errors
    points = [pt for pt in points if pt["k"] is None or pt["n"] is None or pt["k"] <= pt["n"]]
    if not points:
        raise UsageError("grid is empty")
    return points


def _violated(rep: ineq.InequalityReport) -> bool:
    return bool(rep.flags.get("violation"))


def _append_csv(path: str, reports):
    text = ineq.reports_to_csv(reports)
    p = Path(path)
    if p.exists() and p.stat().st_size > 0:
        text = text.split("\n", 1)[1]
    with p.open("a") as fh:
        fh.write(text)


def cmd_eval(args, out) -> int:
    pt = _grid(args)
    if len(pt) != 1:
        raise UsageError("eval takes single values; use sweep for grids")
    rep = evaluate(args.inequality, args, pt[0])
    text = rep.to_json(include_time=False)
    outputs = []
    if args.json:
        obj = json.loads(text)
        obj["manifest"] = manifest_path(args.json).name
        Path(args.json).write_text(json.dumps(obj, sort_keys=True) + "\n")
        outputs.append(args.json)
    else:
        out.write(text + "\n")
    if args.csv:
        _append_csv(args.csv, [rep])
        outputs.append(args.csv)
    _write_manifest(RunManifest("eval", _params(args), args.seed, outputs=outputs))
    return EXIT_VIOLATION if _violated(rep) else EXIT_OK


def cmd_sweep(args, out) -> int:
    reports = [evaluate(args.inequality, args, pt) for pt in _grid(args)]
    _emit_csv(args, out, ineq.reports_to_csv(reports), "sweep")
    return EXIT_VIOLATION if any(map(_violated, reports)) else EXIT_OK


def _emit_csv(args, out, text: str, command: str):
    if args.csv:
        Path(args.csv).write_text(text)
        _write_manifest(RunManifest(command, _params(args), getattr(args, "seed", None), outputs=[args.csv]))
    else:
        out.write(text)


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# ---------------------------------------------------------------------------
# verify, search, geometry

def cmd_verify(args, out) -> int:
    seed = 0 if args.seed is None else args.seed
    report = verify.run_suite(args.suite, args.n_max, seed)
    text = verify.report_json(report)
    if args.json:
        report = dict(report, manifest=manifest_path(args.json).name)
        Path(args.json).write_text(verify.report_json(report))
        _write_manifest(RunManifest("verify", _params(args), seed, outputs=[args.json]))
    else:
        out.write(text)
    if report["failures"]:
        print("failed checks: " + ", ".join(report["failures"]), file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


def cmd_search(args, out) -> int:
    if args.rule == "fixed":
        if args.k is None:
            raise UsageError("--rule fixed needs --k")
        rule = ("fixed", int(_single(parse_range(args.k), "--k")))
    else:
        rule = args.rule
    cfg = search.SearchConfig(
        restarts=args.restarts, iterations=args.iterations, step=args.step, decay=args.decay, tol=args.tol,
        seed=0 if args.seed is None else args.seed,
        constraint="mean_zero" if args.objective == "chaos" else "none",
        coords_per_iteration=args.coords_per_iteration,
    )
    if args.n is None or args.p is None:
        raise UsageError("search needs --n and --p")
    ns, ps = parse_range(args.n), parse_range(args.p)
    results = []
    for n in ns:
        for p in ps:
            results += search.constant_sweep([n], rule, p, cfg, objective=args.objective)
    _emit_csv(args, out, search.sweep_to_csv(results, rule), "search")
    if args.json:
        Path(args.json).write_text(json.dumps([r.summary() for r in results], sort_keys=True) + "\n")
    return EXIT_OK


def cmd_geometry(args, out) -> int:
    if args.p is None or args.q is None or args.n is None:
        raise UsageError("geometry needs --p, --q and --n")
    grid = [parse_range(v) if v is not None else [d] for v, d in
            ((args.p, None), (args.q, None), (args.m or "1", None), (args.n, None), (args.theta, None))]
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=geo.GEOMETRY_COLUMNS, lineterminator="\n")
    wr.writeheader()
    for p, q, m, n, theta in itertools.product(*grid):
        if not isinstance(m, int) or not isinstance(n, int):
            raise UsageError("--m and --n must be integers")
        wr.writerow(geo.geometry_row(p, q, m, n, theta))
    _emit_csv(args, out, buf.getvalue(), "geometry")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

EVAL_COLUMNS = """\
CSV columns (eval --csv, sweep): name, mode, param_<key> for every evaluator
parameter in sorted order, lhs, rhs_<term> for every right-side term, rhs,
ratio, seed, and stderr_<term> for Monte Carlo runs.  ratio = lhs / rhs with
rhs = rhs_scale * (sum of rhs terms)^(1/rhs_root); no implicit constant is
applied, and ratio is 0 when rhs is 0."""

SEARCH_COLUMNS = """\
CSV columns: n, k, p, rule (fixed<k>, half or sqrt), best_ratio (best lhs/rhs
ratio found), restarts (random restarts per search), seed (master seed)."""

GEOMETRY_HELP = """\
CSV columns: p, q, m, n, theta (inputs); n_exponent and m_exponent (exponents
of n and m in the grid distortion); threshold_exponent and phase_threshold
(n^threshold_exponent, the grid size where the distortion saturates);
distortion (min(n^n_exponent, m^m_exponent)); grid_lower_bound and grid_k
(best lower bound over k and its maximizer); critical_theta (q/p);
snowflake_bound and snowflake_k (lower bound on the Lipschitz constant of a
theta-snowflake embedding, and the minimizing k).  All quantities drop the
implicit (p,q)-dependent constants, i.e. they hold up to constant factors.
Empty cells mean the quantity needs q > 2 or a theta."""


def _common(sp, grid: bool = True):
    g = sp.add_argument_group("grid (values, comma lists or lo..hi[:step])")
    for flag in ("n", "k", "p", "r", "alpha") if grid else ():
        g.add_argument(f"--{flag}")
    sp.add_argument("--mode", choices=("exact", "mc"), default="exact")
    sp.add_argument("--budget", type=int, default=None, help="Monte Carlo sample count")
    sp.add_argument("--seed", type=int, default=None, help="master seed (mandatory for --mode mc)")
    sp.add_argument("--csv", metavar="PATH")
    sp.add_argument("--json", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discrete-xp", description="Walsh/torus inequality toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a property suite",
                       description="Exit 0 iff every check passes; the JSON report lists each check "
                                   "with its trial count and worst observed error or slack.")
    v.add_argument("suite", choices=verify.SUITES + ("all",))
    v.add_argument("--n-max", type=int, default=12)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--json", metavar="PATH")
    v.set_defaults(func=cmd_verify)

    for name, func, helptext in (("eval", cmd_eval, "evaluate one inequality"),
                                 ("sweep", cmd_sweep, "evaluate an inequality over a grid")):
        sp = sub.add_parser(name, help=helptext, epilog=EVAL_COLUMNS,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("inequality", choices=EVALUATORS)
        _common(sp)
        sp.add_argument("--a", default="ones", help="linear coefficients: ones, e1 or a comma list")
        sp.add_argument("--h", default="random",
                        help="cube input: character:1,2 | linear:<a> | random | path to JSON")
        sp.add_argument("--f", default="cosine-sum", choices=sorted(tor.GENERATORS), help="torus generator")
        sp.add_argument("--f-param", action="append", metavar="KEY=VALUE", help="generator parameter")
        sp.add_argument("--input", metavar="PATH", help="torus function JSON (overrides --f)")
        sp.add_argument("--S", default=None, help="coordinate subset, comma list (default: all)")
        sp.add_argument("--refined", action="store_true", help="chaos-xp: add prefactored ratios")
        sp.add_argument("--generic-scaling", action="store_true",
                        help="metric-xp: use scale m = r instead of the r = 4m normalization")
        sp.set_defaults(func=func)

    s = sub.add_parser("search", help="extremal ratio search across n", epilog=SEARCH_COLUMNS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--objective", choices=("linear", "chaos"), default="chaos")
    s.add_argument("--rule", choices=("fixed", "half", "sqrt"), default="half")
    s.add_argument("--n")
    s.add_argument("--k", help="k for --rule fixed")
    s.add_argument("--p")
    s.add_argument("--restarts", type=int, default=4)
    s.add_argument("--iterations", type=int, default=40)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("--decay", type=float, default=0.5)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--coords-per-iteration", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", metavar="PATH")
    s.add_argument("--json", metavar="PATH", help="dump argmax and per-restart results")
    s.set_defaults(func=cmd_search)

    g = sub.add_parser("geometry", help="closed-form distortion grid", epilog=GEOMETRY_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    for flag in ("p", "q", "m", "n", "theta"):
        g.add_argument(f"--{flag}")
    g.add_argument("--csv", metavar="PATH")
    g.set_defaults(func=cmd_geometry)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
