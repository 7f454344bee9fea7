"""Closed-form cut probabilities against Monte Carlo frequencies as the
number of trials grows; the maximum deviation should shrink like
1/sqrt(trials).

    python scripts/mc_sweep.py --leaves 30 --hierarchies 5
"""
import argparse

import numpy as np

from swshier.sws import MarkerModel, edge_probabilities, monte_carlo_cut_frequency
from swshier.synthetic import random_hierarchy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--leaves", type=int, default=30)
    ap.add_argument("--hierarchies", type=int, default=5)
    ap.add_argument("--count", type=float, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    hs = [random_hierarchy(rng, args.leaves) for _ in range(args.hierarchies)]
    print(f"{'model':<24}{'trials':>9}{'max |P - f|':>14}{'x sqrt(trials)':>16}")
    for process in ("poisson", "uniform"):
        for measure in ("surface", "volume"):
            model = MarkerModel(process, measure, count=args.count)
            probs = [edge_probabilities(h, model) for h in hs]
            for trials in (1_000, 10_000, 100_000):
                dev = max(float(np.abs(p - monte_carlo_cut_frequency(h, model, trials, seed=k)).max())
                          for k, (h, p) in enumerate(zip(hs, probs)))
                print(f"{process + '/' + measure:<24}{trials:>9}{dev:>14.5f}"
                      f"{dev * np.sqrt(trials):>16.3f}")


if __name__ == "__main__":
    main()
