"""Run built-in suites over several seeds and print one summary row per suite.

    python3 scripts/run_benchmarks.py --suites sphere constrained --seeds 10 --out-dir runs
"""

import argparse
import json
import statistics
import time
from pathlib import Path

from barrier_es.config import SUITES, suite
from barrier_es.diagnostics import sigma_convergence_check, write_trace
from barrier_es.engine import run_detailed
from barrier_es.problems import make_problem


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--suites", nargs="+", default=list(SUITES))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out-dir", default="runs")
    args = ap.parse_args()

    for name in args.suites:
        cfg = suite(name)
        out = Path(args.out_dir) / name
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        finals, viol, conv = [], [], 0
        for seed in range(args.seeds):
            problem = make_problem(cfg.problem)
            r = run_detailed(cfg.engine, problem, seed, **cfg.run_kwargs())
            write_trace(r.trace, out / f"seed-{seed:03d}.csv")
            finals.append(r.trace[-1].f_exact)
            viol.append(r.trace[-1].violation)
            conv += sigma_convergence_check(r.trace)
        print(json.dumps({
            "suite": name, "seeds": args.seeds,
            "median_final_f": statistics.median(finals),
            "max_final_violation": max(viol),
            "sigma_converged": conv,
            "seconds": round(time.perf_counter() - t0, 1),
        }))


if __name__ == "__main__":
    main()
