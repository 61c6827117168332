"""Solve a small bridge problem and print the solution next to the prior.

    python3 scripts/bridge_example.py --n 3 --T 4 --seed 1
"""
import argparse

import numpy as np

from pathbridge import bridge, paths, random_models as rm
from pathbridge.chain import propagate_forward


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--T", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    prior = rm.chain(args.n, args.T, rng)
    p0, p1 = rm.prob_vector(args.n, rng), rm.prob_vector(args.n, rng)
    np.set_printoptions(precision=4, suppress=True)

    print("existence:", bridge.existence_check(prior, p0, p1).status.value)
    sol = bridge.mep3_bridge(prior, p0, p1)
    print(f"sweeps: {sol.diagnostics['iterations']}, residuals:",
          {k: f"{v:.1e}" for k, v in sol.diagnostics["residuals"].items()})
    print("prior marginals:\n", propagate_forward(prior))
    print("bridge marginals:\n", sol.marginals)
    cost = bridge.ld_exponent("mep3", prior, p0, p1, pair=sol.pair)
    direct = paths.path_relative_entropy(paths.enumerate_path_distribution(sol.chain),
                                         paths.enumerate_path_distribution(prior))
    print(f"exponent {cost:.12f}, enumerated D(P||Pi) {direct:.12f}")
    rep = paths.verify_optimality("mep3", prior, sol, 200, args.seed, p0, p1)
    print(f"200 perturbed competitors: min gap {rep.min_gap:.3e}, violations {len(rep.violations)}")


if __name__ == "__main__":
    main()
