"""Claim-1 deviation and test-2 failure of perturbed honest strategies at n = 1.

    python3 scripts/claim1_trend.py [--seeds 3] [--csv trend.csv]
"""

import argparse
import csv
import sys

import numpy as np

from lhmip import extraction, hamiltonian, protocol, strategy
from lhmip.qmath import PureState, random_state_vector

THETAS = (0.2, 0.1, 0.05, 0.025)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--csv")
    args = ap.parse_args()
    inst = hamiltonian.single_qubit_terms(1)
    rows = []
    for seed in range(args.seeds):
        gamma = PureState(1, random_state_vector(1, np.random.default_rng(seed)))
        base = strategy.honest(inst, gamma)
        dev, eps = [], []
        for th in THETAS:
            s = strategy.perturb(base, th, seed)
            dev.append(extraction.claim1_average(s))
            eps.append(1 - protocol.accept_probability_exact(inst, s).p_test2)
            rows.append((seed, th, dev[-1], eps[-1]))
        logt = np.log(THETAS)
        ratio = np.array(dev) / np.array(eps)
        print(
            f"seed {seed}: slope(dev) {np.polyfit(logt, np.log(dev), 1)[0]:.3f}  "
            f"slope(eps) {np.polyfit(logt, np.log(eps), 1)[0]:.3f}  ratio spread {ratio.max() / ratio.min():.3f}"
        )
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out)
    w.writerow(["seed", "theta", "claim1_deviation", "test2_failure"])
    for r in rows:
        w.writerow([r[0]] + [format(v, ".17g") for v in r[1:]])


if __name__ == "__main__":
    main()
