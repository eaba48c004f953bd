"""Batch sizes demanded by the concentration bound, to show why fixed and
capped schedules exist.

    python3 scripts/sample_budget_table.py --v 1.0 --p 0.75
"""

import argparse

from barrier_es.oracles import required_samples


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--v", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=0.75)
    args = ap.parse_args()

    sigmas = [1.0, 0.5, 0.1, 0.05, 0.01, 0.001]
    print("eps_f    " + "".join(f"{s:>12g}" for s in sigmas))
    for eps_f in (0.5, 0.1, 1e-2, 1e-3):
        row = [required_samples(args.v, eps_f, s, args.p) for s in sigmas]
        print(f"{eps_f:<9g}" + "".join(f"{n:>12.3g}" for n in row))


if __name__ == "__main__":
    main()
