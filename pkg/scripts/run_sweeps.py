#!/usr/bin/env python3
"""Regenerate every sweep CSV (and the validation report) from configs/.

    python3 scripts/run_sweeps.py --outdir results
"""

import argparse
import sys
from pathlib import Path

from ghzdist.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

JOBS = [
    ("parent_fidelity_users", ["parent-fidelity"]),
    ("parent_fidelity_fsrc", ["parent-fidelity"]),
    ("parent_rate", ["parent-rate"]),
    ("boundary_rate", ["boundary", "--metric", "rate"]),
    ("boundary_fidelity", ["boundary", "--metric", "fidelity"]),
    ("curves_rate", ["curves", "--metric", "rate"]),
    ("curves_fidelity", ["curves", "--metric", "fidelity"]),
]


def run(outdir: Path, workers: int, with_validation: bool) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name, cmd in JOBS:
        args = cmd + ["--config", str(CONFIGS / f"{name}.json"),
                      "--out", str(outdir / f"{name}.csv"), "--workers", str(workers)]
        if cmd[0] == "boundary":
            args += ["--boundary-out", str(outdir / f"{name}_edge.csv")]
        code = main(args)
        print(f"{name:24s} exit={code}")
        worst = max(worst, code)
    if with_validation:
        code = main(["validate", "--config", str(CONFIGS / "validate.json"),
                     "--out", str(outdir / "validation.json"), "--workers", str(workers)])
        print(f"{'validation':24s} exit={code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip-validation", action="store_true")
    a = ap.parse_args()
    sys.exit(run(Path(a.outdir), a.workers, not a.skip_validation))
