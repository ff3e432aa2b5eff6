"""Command-line front end.

Every subcommand writes JSON/CSV artifacts plus ``<command>.manifest.json``
into the output directory. Options may also come from a flat ``key = value``
file given with ``--config``; command-line flags take precedence. The output
directory can be overridden with the ``STABLE_LASSO_OUT`` environment variable.

Exit codes: 0 on success, 1 when a pipeline operation fails, 2 for invalid
configuration or input validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path

import numpy as np

from .data import SeedSpec, load_csv, standardize, write_csv
from .errors import StableLassoError, TaggedError
from .ranking import air_holp, default_threshold, ridge_holp
from .scenarios import SCHEMES, THRESHOLDS, WeightScheme, f1_curve, generate, make_weights, preset, run_experiment
from .solver import PenaltySpec, cd_fit, kkt_check, lambda_path
from .stability import StabilityProfile, make_plan, run_stability_selection, select, tune_lambda

OUT_ENV = "STABLE_LASSO_OUT"
FAMILIES = ("lasso", "scad", "mcp")
STOCHASTIC_SCHEMES = {"adaptive_lasso_init", "randomized"}


class ConfigError(Exception):
    """Invalid or incomplete configuration (exit code 2)."""


class OperationError(Exception):
    """A pipeline operation failed (exit code 1)."""

    def __init__(self, operation, cause):
        self.operation = operation
        self.cause = cause
        super().__init__(f"{operation}: {type(cause).__name__}: {cause}")

    def to_dict(self):
        out = {"operation": self.operation, "error": type(self.cause).__name__, "message": str(self.cause)}
        if isinstance(self.cause, TaggedError):
            out["error"] = type(self.cause.cause).__name__
            out["tags"] = self.cause.tags
        return out


@contextmanager
def operation(name):
    """Report failures of a module operation as ``OperationError``."""
    try:
        yield
    except (StableLassoError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise OperationError(name, exc) from exc


# ---------------------------------------------------------------------------
# config handling


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _positive_int(text) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _seed(text) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _thresholds(text) -> list[float]:
    values = [float(t) for t in str(text).split(",") if t.strip()]
    if not values or any(not 0 < t <= 1 for t in values):
        raise argparse.ArgumentTypeError("thresholds must lie in (0, 1]")
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stable-lasso", description="Stable Lasso pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key = value file; flags override it")
        p.add_argument("--out", help=f"output directory (env {OUT_ENV} overrides the config file)")

    def data_args(p):
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--response", default="y", help="response column name or 0-based index")
        p.add_argument("--no-header", action="store_true", default=False)

    def weight_args(p):
        p.add_argument("--weights", default="stable",
                       help=f"one of {', '.join(SCHEMES)} or a file with one weight per line")
        p.add_argument("--truth", help="comma-separated true coefficients for adaptive_oracle, or a .meta.json")

    p = sub.add_parser("simulate", help="draw a synthetic data set")
    common(p)
    p.add_argument("--preset", default="main")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--stream", type=int, default=0, help="replicate / stream id")

    p = sub.add_parser("rank", help="Air-HOLP or Ridge-HOLP ranking")
    common(p)
    data_args(p)
    p.add_argument("--method", choices=("air", "ridge"), default="air")
    p.add_argument("--ridge-penalty", type=float, default=10.0)
    p.add_argument("--threshold-d", type=_positive_int)
    p.add_argument("--max-iter", type=_positive_int, default=10)

    p = sub.add_parser("fit", help="weighted penalized fit at one lambda")
    common(p)
    data_args(p)
    weight_args(p)
    p.add_argument("--family", choices=FAMILIES, default="lasso")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--seed", type=_seed)

    p = sub.add_parser("stabsel", help="Stability Selection profile and tuned lambda")
    common(p)
    data_args(p)
    weight_args(p)
    p.add_argument("--family", choices=FAMILIES, default="lasso")
    p.add_argument("--b", type=_positive_int, default=100)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--num-lambdas", type=_positive_int, default=100)
    p.add_argument("--min-ratio", type=float)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--sd-rule", choices=("grid", "bootstrap"), default="grid")
    p.add_argument("--force-1sd", type=_bool, default=True, help="always use the one-sd rule")

    p = sub.add_parser("tune", help="choose lambda from a stabsel profile")
    common(p)
    p.add_argument("--profile", help="profile JSON written by stabsel")
    p.add_argument("--sd-rule", choices=("grid", "bootstrap"), default="grid")
    p.add_argument("--force-1sd", type=_bool, default=False)

    p = sub.add_parser("evaluate", help="F1 curve of a stabsel profile against a known support")
    common(p)
    p.add_argument("--profile", help="profile JSON written by stabsel")
    p.add_argument("--meta", help=".meta.json written by simulate")
    p.add_argument("--support", help="comma-separated 0-based true support (instead of --meta)")
    p.add_argument("--lambda", dest="lam", type=float, help="defaults to the tuned lambda")
    p.add_argument("--thresholds", type=_thresholds, default=list(THRESHOLDS))

    p = sub.add_parser("benchmark", help="Monte-Carlo comparison of weighting schemes")
    common(p)
    p.add_argument("--preset", default="main")
    p.add_argument("--schemes", default="stable,uniform")
    p.add_argument("--replicates", type=_positive_int, default=20)
    p.add_argument("--b", type=_positive_int, default=100)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--family", choices=FAMILIES, default="lasso")
    p.add_argument("--num-lambdas", type=_positive_int, default=100)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--sd-rule", choices=("grid", "bootstrap"), default="grid")
    p.add_argument("--force-1sd", type=_bool, default=True)
    p.add_argument("--thresholds", type=_thresholds, default=list(THRESHOLDS))
    return parser


def parse_config(argv) -> argparse.Namespace:
    """Parse flags, merging in ``--config`` values underneath them."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known - {"config"})
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    env_out = os.environ.get(OUT_ENV)
    if env_out and not any(a == "--out" or a.startswith("--out=") for a in argv):
        args.out = env_out
    args.out = Path(args.out or ".")
    args.no_header = _bool(getattr(args, "no_header", False))
    return args


def resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, Path):
            v = str(v)
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# helpers


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n.replace("_", "-")) for n in missing)
        raise ConfigError(f"{args.command} requires {flags}")


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _write_rows(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from exc


def _load_data(args):
    _require(args, "data")
    if not Path(args.data).is_file():
        raise ConfigError(f"data file not found: {args.data}")
    response = args.response
    if isinstance(response, str) and response.lstrip("-").isdigit():
        response = int(response)
    try:
        raw = load_csv(args.data, response, has_header=not args.no_header)
    except StableLassoError as exc:
        raise ConfigError(f"data_core.load_csv: {type(exc).__name__}: {exc}") from exc
    with operation("data_core.standardize"):
        return standardize(raw.x, raw.y), raw.feature_names


def _truth_vector(args, p):
    if args.truth is None:
        return None
    text = str(args.truth)
    if text.endswith(".json"):
        meta = _load_json(text, "meta file")
        beta = np.zeros(p)
        for j, b in meta["spec"]["beta_true"].items():
            beta[int(j)] = b
        return beta
    beta = np.array([float(t) for t in text.split(",")])
    if beta.size != p:
        raise ConfigError(f"--truth has {beta.size} values, expected {p}")
    return beta


def _weights(args, data):
    kind = args.weights
    if kind not in SCHEMES:
        path = Path(kind)
        if not path.is_file():
            raise ConfigError(f"--weights must be one of {', '.join(SCHEMES)} or an existing file")
        w = np.loadtxt(path, dtype=np.float64, ndmin=1)
        if w.shape != (data.p,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigError(f"weight file must hold {data.p} non-negative numbers")
        return w
    if kind in STOCHASTIC_SCHEMES and getattr(args, "seed", None) is None:
        raise ConfigError(f"--weights {kind} is random and requires --seed")
    if kind == "adaptive_oracle" and args.truth is None:
        raise ConfigError("--weights adaptive_oracle requires --truth")
    seed = SeedSpec(args.seed if args.seed is not None else 0, getattr(args, "stream", 0))
    with operation("scenarios.make_weights"):
        return make_weights(WeightScheme(kind), data, _truth_vector(args, data.p), seed)


def _profile_from_json(doc) -> StabilityProfile:
    try:
        lambdas = np.asarray(doc["lambdas"], dtype=np.float64)
        p = int(doc["p"])
        freqs = np.zeros((lambdas.size, p))
        for k, row in enumerate(doc["frequencies"]):
            for j, f in row.items():
                freqs[k, int(j)] = f
        return StabilityProfile(lambdas, np.asarray(doc["phi"], dtype=np.float64),
                                np.asarray(doc["phi_sd"], dtype=np.float64), freqs)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed profile document: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    _require(args, "seed")
    try:
        spec = preset(args.preset, SeedSpec(args.seed, args.stream))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with operation("scenarios.generate"):
        x, y, truth = generate(spec)
    names = [f"x{j + 1}" for j in range(spec.p)]
    csv_path = args.out / f"{args.preset}.csv"
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(csv_path, x, y, names, "y")
    meta = {"true_support": sorted(truth), "spec": spec.to_dict(), "config": resolved(args)}
    return [csv_path, _write_json(args.out / f"{args.preset}.meta.json", meta)]


def cmd_rank(args):
    data, names = _load_data(args)
    if args.method == "ridge":
        with operation("ranking.ridge_holp"):
            ranking = ridge_holp(data, args.ridge_penalty)
    else:
        d = args.threshold_d
        if d is None:
            if data.n < 3:
                raise ConfigError("need at least 3 rows for the default screening threshold")
            d = default_threshold(data.n)
        with operation("ranking.air_holp"):
            ranking = air_holp(data, d, args.max_iter)
    doc = ranking.to_dict() | {"features": names, "config": resolved(args)}
    return [_write_json(args.out / "rank.json", doc)]


def cmd_fit(args):
    _require(args, "lam")
    data, names = _load_data(args)
    w = _weights(args, data)
    try:
        pen = PenaltySpec(args.family, args.lam, w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with operation("solver.cd_fit"):
        fit = cd_fit(data, pen)
        kkt = kkt_check(data, pen, fit.beta)
    doc = {
        "lambda": fit.lam,
        "beta": {str(j): float(fit.beta[j]) for j in fit.support},
        "iterations": fit.iterations,
        "converged": fit.converged,
        "kkt_residual": kkt,
        "objective": fit.objective,
        "features": names,
        "config": resolved(args),
    }
    return [_write_json(args.out / "fit.json", doc)]


def cmd_stabsel(args):
    _require(args, "seed")
    if args.b < 2:
        raise ConfigError("--b must be at least 2")
    data, names = _load_data(args)
    w = _weights(args, data)
    seed = SeedSpec(args.seed, args.stream)
    with operation("solver.lambda_path"):
        grid = lambda_path(data, w, args.num_lambdas, args.min_ratio).values
    try:
        plan = make_plan(data.n, args.b, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with operation("stability.run_stability_selection"):
        profile = run_stability_selection(data, plan, args.family, w, grid, threads=args.threads)
    with operation("stability.tune_lambda"):
        tuned = tune_lambda(profile, force_1sd=args.force_1sd, sd_rule=args.sd_rule)
    doc = profile.to_dict() | {"p": data.p, "features": names, "tuned": tuned.to_dict(),
                               "weights": w.tolist(), "config": resolved(args)}
    rows = [{"lambda": float(l), "phi": float(f), "phi_sd": float(s)}
            for l, f, s in zip(profile.lambdas, profile.phi, profile.phi_sd)]
    return [_write_json(args.out / "stabsel.json", doc), _write_rows(args.out / "stability_curve.csv", rows)]


def cmd_tune(args):
    _require(args, "profile")
    profile = _profile_from_json(_load_json(args.profile, "profile"))
    with operation("stability.tune_lambda"):
        tuned = tune_lambda(profile, force_1sd=args.force_1sd, sd_rule=args.sd_rule)
    doc = tuned.to_dict() | {"phi": float(profile.phi[tuned.index]), "config": resolved(args)}
    return [_write_json(args.out / "tune.json", doc)]


def cmd_evaluate(args):
    _require(args, "profile")
    doc = _load_json(args.profile, "profile")
    profile = _profile_from_json(doc)
    if args.support is not None:
        truth = [int(t) for t in str(args.support).split(",") if t.strip()]
    elif args.meta is not None:
        truth = _load_json(args.meta, "meta file")["true_support"]
    else:
        raise ConfigError("evaluate requires --meta or --support")
    lam = args.lam if args.lam is not None else doc.get("tuned", {}).get("lambda")
    if lam is None:
        raise ConfigError("profile has no tuned lambda; pass --lambda")
    with operation("stability.select"):
        k = profile.index_of(lam)
        chosen = {str(t): sorted(select(profile, lam, t)) for t in args.thresholds}
    rows = f1_curve(profile.frequencies[k], truth, args.thresholds)
    out = {"lambda": lam, "phi": float(profile.phi[k]), "true_support": sorted(truth), "rows": rows,
           "selected": chosen, "config": resolved(args)}
    return [_write_json(args.out / "evaluate.json", out), _write_rows(args.out / "evaluate.csv", rows)]


def cmd_benchmark(args, timings):
    _require(args, "seed")
    kinds = [s.strip() for s in str(args.schemes).split(",") if s.strip()]
    bad = [s for s in kinds if s not in SCHEMES]
    if bad or not kinds:
        raise ConfigError(f"unknown schemes {bad}; choose from {', '.join(SCHEMES)}")
    try:
        scenario = preset(args.preset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    with operation("scenarios.run_experiment"):
        report = run_experiment(scenario, kinds, args.replicates, args.b, SeedSpec(args.seed),
                                family=args.family, num_lambdas=args.num_lambdas,
                                force_1sd=args.force_1sd, thresholds=args.thresholds,
                                threads=args.threads, sd_rule=args.sd_rule)
    timings.update({s: report.seconds(s) for s in kinds})
    doc = report.to_dict(timing=False) | {"config": resolved(args)}
    return [_write_json(args.out / "benchmark.json", doc),
            _write_rows(args.out / "benchmark_f1.csv", report.threshold_rows())]


COMMANDS = {
    "simulate": cmd_simulate, "rank": cmd_rank, "fit": cmd_fit, "stabsel": cmd_stabsel,
    "tune": cmd_tune, "evaluate": cmd_evaluate,
}


def versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_config(argv)
        t0 = time.perf_counter()
        timings = {}
        if args.command == "benchmark":
            outputs = cmd_benchmark(args, timings)
        else:
            outputs = COMMANDS[args.command](args)
        manifest = {
            "command": args.command,
            "config": resolved(args),
            "seed": getattr(args, "seed", None),
            "versions": versions(),
            "wall_time_seconds": time.perf_counter() - t0,
            "outputs": [str(p) for p in outputs],
        }
        if timings:
            manifest["scheme_seconds"] = timings
        _write_json(args.out / f"{args.command}.manifest.json", manifest)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2
    except OperationError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    for p in outputs:
        print(p)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
