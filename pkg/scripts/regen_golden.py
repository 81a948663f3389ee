#!/usr/bin/env python3
"""Rewrite the golden CSV fixtures under tests/golden/.

Only run this after an intentional change to numerics or output format;
the test suite compares against these files byte for byte.
"""

from pathlib import Path

from ghzdist.cli import main

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"

COMMANDS = {
    "parent_fidelity": ["parent-fidelity"],
    "parent_rate": ["parent-rate"],
    "boundary_rate": ["boundary", "--metric", "rate"],
    "boundary_fidelity": ["boundary", "--metric", "fidelity"],
    "curves_rate": ["curves", "--metric", "rate"],
    "curves_fidelity": ["curves", "--metric", "fidelity"],
}

if __name__ == "__main__":
    for name, cmd in COMMANDS.items():
        args = cmd + ["--config", str(GOLDEN / f"{name}.json"), "--out", str(GOLDEN / f"{name}.csv")]
        if cmd[0] == "boundary":
            args += ["--boundary-out", str(GOLDEN / f"{name}_edge.csv")]
        code = main(args)
        print(f"{name}: exit {code}")
