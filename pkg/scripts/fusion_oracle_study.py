#!/usr/bin/env python3
"""Fused-state fidelity: closed-form subset rules versus the density-matrix oracle.

Each parent is an independent mixture ``p |GHZ><GHZ| + (1 - p) I / 2^N``.
Printing one row per configuration of pure/mixed parents shows which sets of
GHZ parents keep their classical correlation after fusion.
"""

import itertools

import numpy as np

from ghzdist.oracle import fidelity_with_ghz, fuse_parents_oracle, fuse_parents_state, ghz_state, maximally_mixed
from ghzdist.repeater import SUBSET_RULES, final_fidelity_array


def main() -> None:
    for n in (2, 3):
        print(f"N={n}: pure(1)/mixed(0) parent patterns, keep=1")
        for pattern in itertools.product((0, 1), repeat=n):
            parents = [ghz_state(n) if b else maximally_mixed(n) for b in pattern]
            f = fidelity_with_ghz(fuse_parents_state(parents))
            print(f"  {pattern}  oracle={f:.6f}")
    print()
    print("N=3 uniform grid, max |analytic - oracle| per rule")
    grid = np.linspace(0, 1, 5)
    worst = dict.fromkeys(SUBSET_RULES, 0.0)
    for p, k in itertools.product(grid, grid):
        o = fuse_parents_oracle(3, float(p), [float(k)] * 3)
        for rule in SUBSET_RULES:
            f, _ = final_fidelity_array(np.full(3, p), np.full(3, k), rule)
            worst[rule] = max(worst[rule], abs(float(f) - o))
    for rule, d in worst.items():
        print(f"  {rule:10s} {d:.3e}")


if __name__ == "__main__":
    main()
