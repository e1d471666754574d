"""Reproduce every figure configuration into one directory.

    python scripts/make_figures.py [--out results/figures] [--seed 0]
"""
import argparse
import sys
from pathlib import Path

from pdmpkit.cli import main

FIGURES = ("fig1", "fig2a", "fig2b", "fig3a", "fig3b")


def run(out: Path, seed: int) -> int:
    for name in FIGURES:
        print(f"== {name}")
        code = main(["figure", name, "--seed", str(seed), "--out", str(out / name)])
        if code:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/figures"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sys.exit(run(args.out, args.seed))
