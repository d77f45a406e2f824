"""Best acceptance the optimizer finds on EPR chains versus satisfiable instances.

    python3 scripts/soundness_probe.py [--restarts 20] [--max-n 3] [--seed 0]

The EPR chain with n >= 3 is frustrated, so its best value stays below 1.
"""

import argparse
import time

from lhmip import hamiltonian
from lhmip.optimizer import OptimizerConfig, restart_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--restarts", type=int, default=20)
    ap.add_argument("--max-n", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cases = [(f"single-qubit n={n}", hamiltonian.single_qubit_terms(n)) for n in (1, 2)]
    cases += [(f"epr-chain n={n}", hamiltonian.gen_epr_chain(n)) for n in range(2, args.max_n + 1)]
    for name, inst in cases:
        e0, _ = hamiltonian.ground(inst)
        t0 = time.perf_counter()
        tr = restart_sweep(inst, OptimizerConfig(seed=args.seed), args.restarts)
        honest = 1 - e0 / (2 * inst.m)
        print(
            f"{name:18s} honest {honest:.6f}  optimizer best {tr.final:.12f}  "
            f"gap {1 - tr.final:.3g}  ({time.perf_counter() - t0:.0f} s)"
        )


if __name__ == "__main__":
    main()
