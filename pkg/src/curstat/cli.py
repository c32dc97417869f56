"""Command-line interface.

Exit codes: 0 success, 2 invalid input or configuration, 3 solver did not
converge, 1 a validation check failed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import CONFIG_SCHEMA_VERSION, __version__
from .appendix import SuiteConfig, results_to_dicts, run_suite, suite_passed
from .errors import InvalidInputError
from .model import as_arrays, read_observations_csv
from .npmle import DEFAULT_MAX_ITER, DEFAULT_TOL, fit_npmle
from .rates import RATE_MODELS, BenchConfig, fit_rate, run_ladder
from .univariate import gcm_mle

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

CONFIG_HELP = """\
Config files are either flat 'key = value' lines ('#' starts a comment) or a
JSON object.  Keys: d, ladder, replications, seed, truth, c1, c2, tol,
max_iter, integrator, nodes, draws, timing.  'ladder' takes a comma separated
list or a JSON array.  Unknown keys are rejected with exit code 2.
"""


# --------------------------------------------------------------------------
# manifest


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, seed, inputs: list[str], outputs: list[Path], wall_s: float) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "config_schema": CONFIG_SCHEMA_VERSION,
        "seed": seed,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": {p.name: _sha256(p) for p in outputs},
        "wall_time_s": round(wall_s, 3),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# config parsing

_BENCH_KEYS = {f.name for f in dataclasses.fields(BenchConfig)}


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    if "," in raw:
        return [_parse_value(x) for x in raw.split(",") if x.strip()]
    return raw


def parse_config_text(text: str) -> dict:
    """Parse 'key = value' lines or a JSON object into a dict."""
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"bad JSON config: {exc}") from None
        if not isinstance(obj, dict):
            raise InvalidInputError("JSON config must be an object")
        return obj
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def bench_config_from(values: dict) -> BenchConfig:
    unknown = sorted(set(values) - _BENCH_KEYS)
    if unknown:
        raise InvalidInputError(f"unknown config keys: {', '.join(unknown)}")
    values = dict(values)
    d = int(values.pop("d", 1))
    if "ladder" in values:
        ladder = values["ladder"]
        values["ladder"] = tuple(int(x) for x in (ladder if isinstance(ladder, (list, tuple)) else [ladder]))
    for key in ("replications", "seed", "max_iter", "nodes", "draws"):
        if key in values:
            values[key] = int(values[key])
    for key in ("c1", "c2", "tol"):
        if key in values:
            values[key] = float(values[key])
    if "timing" in values:
        values["timing"] = bool(values["timing"])
    try:
        return BenchConfig.defaults(d, **values)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from None


def _parse_ladder(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise InvalidInputError(f"bad ladder {text!r}; expected e.g. 50,100,200") from None


# --------------------------------------------------------------------------
# commands


def _read_univariate(path: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for tname, dname in (("t", "delta"), ("t_1", "delta_1")):
        if set(header) == {tname, dname}:
            break
    else:
        raise InvalidInputError(f"{path}: expected columns t, delta; got {header}")
    ti, di = header.index(tname), header.index(dname)
    t, delta = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise InvalidInputError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            t.append(float(row[ti]))
            delta.append(int(row[di]))
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    if not t:
        raise InvalidInputError(f"{path}: no observations")
    T, D = as_arrays((np.array(t)[:, None], np.array(delta)[:, None]))
    return T[:, 0], D[:, 0]


def cmd_mle1d(args) -> int:
    start = time.perf_counter()
    t, delta = _read_univariate(args.input)
    fit = gcm_mle((t, delta))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Path(args.output) if args.output else out_dir / "mle1d.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "F"])
        for k, v in zip(fit.knots, fit.values):
            w.writerow([repr(float(k)), repr(float(v))])
    write_manifest(out_dir, "mle1d", {}, None, [args.input], [out], time.perf_counter() - start)
    return EXIT_OK


def cmd_mled(args) -> int:
    start = time.perf_counter()
    T, D = read_observations_csv(args.input)
    res = fit_npmle((T, D), tol=args.tol, max_iter=args.max_iter, prune=args.prune)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dist = res.distribution
    d = dist.d
    weights_path = out_dir / "weights.csv"
    with open(weights_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"lower_{j + 1}" for j in range(d)] + [f"upper_{j + 1}" for j in range(d)] + ["weight"])
        for lo, hi, wt in zip(dist.lower, dist.upper, dist.weights):
            w.writerow([repr(float(x)) for x in lo] + [repr(float(x)) for x in hi] + [repr(float(wt))])
    fit = res.fit
    diag = {
        "loglik": float(fit.loglik) * T.shape[0],
        "mean_loglik": float(fit.loglik),
        "gap": float(fit.optimality_gap),
        "iterations": int(fit.iterations),
        "newton_steps": int(fit.newton_steps),
        "converged": bool(fit.converged),
        "n": int(T.shape[0]),
        "d": int(d),
        "grid_cells": int(res.problem.n_grid_cells),
        "reduced_cells": int(res.problem.A.shape[1]),
        "support_size": int(dist.weights.size),
    }
    diag_path = out_dir / "diagnostics.json"
    _write_json(diag_path, diag)
    config = {"tol": args.tol, "max_iter": args.max_iter, "prune": args.prune}
    write_manifest(out_dir, "mled", config, None, [args.input], [weights_path, diag_path], time.perf_counter() - start)
    if not fit.converged:
        print(f"not converged after {fit.iterations} iterations (gap {fit.optimality_gap:.3g})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _resolve_bench_config(args) -> BenchConfig:
    values: dict = {}
    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read manifest: {exc}") from None
        if manifest.get("command") != "simulate-rates":
            raise InvalidInputError("manifest was not written by simulate-rates")
        values.update(manifest["config"])
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise InvalidInputError(f"cannot read config: {exc}") from None
        values.update(parse_config_text(text))
    if args.seed is not None:
        values["seed"] = args.seed
    if args.dimension is not None:
        values["d"] = args.dimension
        if "ladder" not in values and args.ladder is None:
            values.pop("ladder", None)
    if args.ladder is not None:
        values["ladder"] = _parse_ladder(args.ladder)
    if args.replications is not None:
        values["replications"] = args.replications
    return bench_config_from(values)


def cmd_simulate_rates(args) -> int:
    start = time.perf_counter()
    config = _resolve_bench_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(rec):
        if args.verbose:
            print(f"n={rec.n} rep={rec.rep} h={rec.hellinger:.5f} converged={rec.converged}", file=sys.stderr)

    table = run_ladder(config, threads=args.threads, progress=progress)
    table_path = out_dir / "rates.csv"
    table_path.write_text(table.to_csv())
    fits = {}
    if len(table.ns()) >= 3:
        for model in RATE_MODELS:
            fits[model] = dataclasses.asdict(fit_rate(table, model, config.d))
    fit_path = out_dir / "fit.json"
    _write_json(fit_path, {"d": config.d, "fits": fits, "medians": {str(k): v for k, v in table.medians().items()}})
    write_manifest(out_dir, "simulate-rates", config.to_dict(), config.seed,
                   [p for p in (args.config, args.manifest) if p], [table_path, fit_path], time.perf_counter() - start)
    for rec in table.records:
        if not rec.converged:
            print(f"warning: n={rec.n} rep={rec.rep} did not converge", file=sys.stderr)
    if not args.quiet:
        for model, fit in fits.items():
            print(f"{model}: slope={fit['slope']:.4f} log_power={fit['log_power']:.4g} C={fit['constant']:.4g} rse={fit['rse']:.3g}")
    return EXIT_OK


def cmd_validate_appendix(args) -> int:
    start = time.perf_counter()
    if args.draws < 100_000:
        raise InvalidInputError("--draws must be >= 100000")
    cfg = SuiteConfig(seed=args.seed, draws=args.draws, nodes=args.nodes, eps0=args.eps0)
    results = run_suite(cfg)
    passed = suite_passed(results)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res_path = out_dir / "appendix.json"
    _write_json(res_path, {"passed": passed, "checks": results_to_dicts(results)})
    if args.json:
        print(json.dumps({"passed": passed, "checks": results_to_dicts(results)}, indent=2))
    else:
        for r in results:
            print(r.line())
        print("all checks passed" if passed else "some checks FAILED")
    write_manifest(out_dir, "validate-appendix", dataclasses.asdict(cfg), args.seed, [], [res_path], time.perf_counter() - start)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="curstat",
        description="Nonparametric MLE for current status data, rate benchmarks and numerical checks.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version",
                   version=f"artifact {__version__} (config schema {CONFIG_SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mle1d", help="univariate MLE via the greatest convex minorant")
    s.add_argument("input", help="CSV with columns t, delta")
    s.add_argument("-o", "--output", help="output CSV (default OUT_DIR/mle1d.csv)")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_mle1d)

    s = sub.add_parser("mled", help="multivariate NPMLE")
    s.add_argument("input", help="CSV with columns t_1..t_d, delta_1..delta_d")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    s.add_argument("--prune", choices=("maximal", "local", "none"), default="maximal",
                   help="candidate cell reduction before solving (default: maximal)")
    s.set_defaults(func=cmd_mled)

    s = sub.add_parser("simulate-rates", help="rate ladder simulation",
                       epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--config", help="config file (key = value or JSON)")
    s.add_argument("--manifest", help="re-run from a manifest.json written by an earlier run")
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--dimension", type=int)
    s.add_argument("--ladder", help="comma separated sample sizes")
    s.add_argument("--replications", type=int)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--quiet", action="store_true")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_simulate_rates)

    s = sub.add_parser("validate-appendix", help="numerical checks of the rate proof's measure computations")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--draws", type=int, default=1_000_000)
    s.add_argument("--nodes", type=int, default=128)
    s.add_argument("--eps0", type=float, default=0.1)
    s.add_argument("--json", action="store_true")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_validate_appendix)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
