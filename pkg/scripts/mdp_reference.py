"""Exact reference values for the tabular benchmarks: optimal return, and the
return, entropy and cost of the uniform starting policy.

    python3 scripts/mdp_reference.py
"""

import numpy as np

from barrier_es.problems import (SoftmaxPolicy, exact_costs, exact_entropy, exact_return,
                                 make_problem)


def main():
    for name in ("chain-entropy", "grid-cmdp"):
        p = make_problem(name)
        mdp = p.meta["mdp"]
        uniform = SoftmaxPolicy(np.zeros((mdp.S, mdp.A)))
        print(f"{name}: S={mdp.S} A={mdp.A} T={mdp.horizon} discount={mdp.discount}")
        print(f"  optimal return      {p.meta['optimal_return']:.4f}")
        print(f"  uniform return      {exact_return(mdp, uniform):.4f}")
        print(f"  uniform entropy     {exact_entropy(mdp, uniform):.4f}"
              f" (max {mdp.horizon * np.log(mdp.A):.4f})")
        if mdp.r:
            print(f"  uniform costs       {exact_costs(mdp, uniform)}"
                  f" thresholds {p.meta['thresholds']}")


if __name__ == "__main__":
    main()
