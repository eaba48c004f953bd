"""Command-line front end.

    barrier-es run --config cfg.json --seed 0 --out trace.csv
    barrier-es bench --suite sphere --seeds 10 --out-dir runs/sphere
    barrier-es check-accuracy --config accuracy --iters 1000
    barrier-es audit-lyapunov --traces runs/theory --nu 0.95

``--config`` and ``--suite`` take either a JSON file or a built-in suite name.
Exit status: 0 on success, 1 on a configuration error, 2 on a runtime error.
Log verbosity comes from the BARRIER_ES_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import SUITES, RunConfig, read_config, suite
from .diagnostics import (accuracy_summary, expected_decrease_audit, read_traces,
                          sigma_convergence_check, write_trace)
from .engine import run_detailed
from .errors import BarrierESError, ConfigError
from .problems import make_problem

log = logging.getLogger("barrier_es")

OK, CONFIG_ERROR, RUNTIME_ERROR = 0, 1, 2


def load_config(source: str) -> RunConfig:
    if Path(source).is_file():
        return read_config(source)
    if source in SUITES:
        return suite(source)
    raise ConfigError("config", f"{source!r} is neither a file nor a built-in suite")


def _summary(result, problem, seed: int) -> dict:
    last = result.trace[-1] if result.trace else None
    return {
        "seed": seed,
        "iterations": len(result.trace),
        "f_initial": problem.exact_objective(result.initial.x) if problem.has_exact else None,
        "f_final": last.f_exact if last else None,
        "f_est_final": result.final.f,
        "violation_final": last.violation if last else None,
        "sigma_final": result.final.sigma,
        "successes": sum(r.success for r in result.trace),
        "samples": sum(r.samples for r in result.trace),
        "sigma_converged": sigma_convergence_check(result.trace),
    }


def _run_one(cfg: RunConfig, seed: int):
    problem = make_problem(cfg.problem)
    return run_detailed(cfg.engine, problem, seed, **cfg.run_kwargs()), problem


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result, problem = _run_one(cfg, args.seed)
    write_trace(result.trace, args.out)
    print(json.dumps(_summary(result, problem, args.seed)))
    return OK


def cmd_bench(args) -> int:
    cfg = load_config(args.suite)
    seeds = args.seeds if args.seeds is not None else cfg.seeds
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in range(seeds):
        result, problem = _run_one(cfg, seed)
        write_trace(result.trace, out / f"seed-{seed:03d}.csv")
        rows.append(_summary(result, problem, seed))
        log.info("seed %d done: %s", seed, rows[-1])
    with open(out / "summary.json", "w") as fh:
        json.dump({"config": cfg.to_dict(), "runs": rows}, fh, indent=2)
        fh.write("\n")
    for row in rows:
        print(json.dumps(row))
    return OK


def cmd_check_accuracy(args) -> int:
    cfg = load_config(args.config)
    cfg = replace(cfg, engine=replace(cfg.engine, budget=args.iters))
    result, problem = _run_one(cfg, args.seed)
    if not problem.has_exact:
        raise BarrierESError(f"problem {problem.name!r} has no exact reference to audit against")
    report = accuracy_summary(result.trace, cfg.schedule.p, args.confidence)
    report["eps_f"] = cfg.schedule.eps_f
    report["mode"] = cfg.schedule.mode
    print(json.dumps(report))
    return OK


def cmd_audit_lyapunov(args) -> int:
    traces = read_traces(args.traces)
    report = expected_decrease_audit(traces, args.nu, bucket=args.bucket)
    print(json.dumps({"seeds": len(traces), "nu": args.nu, **report.to_dict()}))
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="barrier-es", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one seed and write its trace")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a suite over several seeds")
    b.add_argument("--suite", required=True)
    b.add_argument("--seeds", type=int)
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("check-accuracy", help="audit the frequency of accurate estimates")
    a.add_argument("--config", required=True)
    a.add_argument("--iters", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--confidence", type=float, default=0.99)
    a.set_defaults(func=cmd_check_accuracy)

    ly = sub.add_parser("audit-lyapunov", help="seed-averaged Lyapunov increments")
    ly.add_argument("--traces", required=True)
    ly.add_argument("--nu", type=float, required=True)
    ly.add_argument("--bucket", type=int, default=10)
    ly.set_defaults(func=cmd_audit_lyapunov)
    return p


def main(argv=None) -> int:
    level = os.environ.get("BARRIER_ES_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (BarrierESError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
