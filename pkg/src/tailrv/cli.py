"""Command line entry point: ``tailrv run spec.json`` and per-task subcommands.

Exit codes: 0 ok, 2 failed identity reports under ``--strict``, 64 spec
error, 65 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .experiment import (TASK_TYPES, ConfigError, TaskError, build_experiment, json_lines,
                         parse_spec, run_experiment)

EXIT_OK, EXIT_STRICT, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 64, 65
SEED_ENV = "TAILRV_SEED"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help=f"master seed (env {SEED_ENV} overrides)")
    p.add_argument("--n", type=int, help="sample count for every selected task")
    p.add_argument("--workers", type=int, help="number of seeded streams (part of the result)")
    p.add_argument("--threads", type=int, default=1,
                   help="threads executing the streams (never changes results)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--strict", action="store_true", help="exit 2 when an identity report fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailrv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every task of an experiment spec")
    run.add_argument("spec")
    _common(run)
    for kind in TASK_TYPES:
        p = sub.add_parser(kind, help=f"run only {kind} tasks")
        p.add_argument("--spec", help="experiment spec; tasks of this type are run")
        if kind != "metric":
            p.add_argument("--process", help="process JSON (a process object, optionally with "
                                             "grid/alpha/norm) when no --spec is given")
        _common(p)
        if kind == "identities":
            p.add_argument("--h", type=int, help="first site (grid index)")
            p.add_argument("--t", type=int, help="second site (grid index)")
            p.add_argument("--shift", type=float, help="lattice shift for the stationarity report")
            p.add_argument("--corrupt", metavar="SITE:FACTOR",
                           help="multiply p_h at SITE by FACTOR before checking")
        if kind == "estimate":
            p.add_argument("--h", type=int)
            p.add_argument("--eps", type=float)
            p.add_argument("--route", choices=["representer", "local", "both"])
        if kind == "diagnostics":
            p.add_argument("--kind", choices=["tightness", "anticoncentration", "ph_ratio", "hill",
                                              "compact_boundedness", "conditional_exceedance"])
        if kind == "metric":
            p.add_argument("--f", required=False, help="CSV path of f")
            p.add_argument("--g", required=False, help="CSV path of g")
            p.add_argument("--windows", type=int, default=8)
            p.add_argument("--norm", default="sup")
    return parser


def _synth_spec(args, kind: str) -> tuple:
    """Single-task spec from flags, returned as JSON text for uniform validation."""
    task: dict = {"type": kind}
    spec: dict = {"alpha": 1.0, "tasks": [task]}
    if kind == "metric":
        if not (args.f and args.g):
            raise ConfigError("metric needs --f and --g (or --spec)", None, "<cli>")
        spec["grid"] = {"lower": 0.0, "upper": 1.0, "resolution": 2}
        spec["norm"] = args.norm
        task.update(f=str(Path(args.f).resolve()), g=str(Path(args.g).resolve()),
                    windows=args.windows)
        return json.dumps(spec, indent=1), "<cli>"
    if not args.process:
        raise ConfigError(f"{kind} needs --spec or --process", None, "<cli>")
    text = Path(args.process).read_text(encoding="utf-8")
    proc, _ = _loads(text, args.process)
    spec["grid"] = proc.pop("grid", {"lower": 0.0, "upper": 1.0, "resolution": 64})
    spec["alpha"] = proc.pop("alpha", 1.0)
    if "norm" in proc:
        spec["norm"] = proc.pop("norm")
    spec["process"] = proc
    for key in ("h", "t", "shift", "eps", "route", "kind"):
        val = getattr(args, key, None)
        if val is not None:
            task[key] = val
    return json.dumps(spec, indent=1), args.process


def _loads(text: str, source: str):
    try:
        return json.loads(text), json_lines(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno, source) from None


def _override_tasks(spec: dict, args, only: str | None) -> dict:
    """Apply ``--n`` and per-command flags to the selected tasks."""
    if args.n is None and only is None:
        return spec
    spec = dict(spec)
    tasks = []
    for t in spec["tasks"]:
        t = dict(t)
        if only is None or t["type"] == only:
            if args.n is not None:
                t["n"] = args.n
            if only == "identities" and getattr(args, "corrupt", None):
                try:
                    site, factor = args.corrupt.split(":")
                    site, factor = int(site), float(factor)
                except ValueError:
                    raise ConfigError("--corrupt expects SITE:FACTOR", None, "<cli>") from None
                t["corrupt"] = {"site": site, "factor": factor}
        tasks.append(t)
    spec["tasks"] = tasks
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    only = None if args.command == "run" else args.command
    try:
        spec_path = args.spec if args.command == "run" or getattr(args, "spec", None) else None
        if spec_path:
            text = Path(spec_path).read_text(encoding="utf-8")
            source = spec_path
        else:
            text, source = _synth_spec(args, args.command)
        spec, lines = parse_spec(text, source)
        spec = _override_tasks(spec, args, only)
        seed = os.environ.get(SEED_ENV)
        seed = int(seed) if seed not in (None, "") else args.seed
        base = Path(spec_path).parent if spec_path else None
        exp = build_experiment(spec, lines, source, seed=seed, workers=args.workers,
                               out=args.out, base_dir=base)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        failed = run_experiment(exp, only, args.threads)
    except TaskError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if failed and args.strict:
        print(f"{failed} identity report(s) failed", file=sys.stderr)
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
