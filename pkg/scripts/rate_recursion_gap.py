#!/usr/bin/env python3
"""Compare the two analytic rate recursions against Monte Carlo.

The printed recursion ("verbatim") can produce CDF values outside [0, 1];
the count of clamped points is shown next to each estimate.
"""

import argparse

from ghzdist.models import NetworkParams
from ghzdist.montecarlo import simulate_repeater
from ghzdist.repeater import RateModel, teleport_expected_time


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-level", type=int, default=3)
    a = ap.parse_args()

    print(f"{'N':>2} {'q':>5} {'q_bsm':>5} {'m':>2} {'MC':>10} {'+-':>7} "
          f"{'renewal':>10} {'verbatim':>10} {'clamped':>7}")
    for n, q, qb in [(2, 0.5, 0.9), (3, 0.5, 0.9), (3, 0.2, 0.95), (4, 0.6, 0.8)]:
        p = NetworkParams(n_users=n, q_link=q, q_bsm=qb)
        t_tel = teleport_expected_time(n, qb)
        models = {mode: RateModel(p, mode) for mode in ("renewal", "verbatim")}
        for m in range(1, a.max_level + 1):
            if n ** (m - 1) * n > 4096:
                continue
            est, _ = simulate_repeater(p, m, a.trials, a.seed)
            ren = models["renewal"].expected_t_max(m) * t_tel
            verb = models["verbatim"].expected_t_max(m) * t_tel
            clamped = models["verbatim"].clamp_counts.get(m, 0)
            print(f"{n:>2} {q:>5} {qb:>5} {m:>2} {est.mean:10.4f} {est.std_error:7.4f} "
                  f"{ren:10.4f} {verb:10.4f} {clamped:>7}")


if __name__ == "__main__":
    main()
