"""Occupation histogram of one long path against the closed-form density.

Writes ``<out>/<case>_bins.csv`` (bin edges, simulated and exact mass) and an
SVG overlay for the linear/logistic cases with positive and negative
logistic intercept.

    python scripts/density_check.py [--tmax 1e5] [--out results/density]
"""
import argparse
import csv
from pathlib import Path

import numpy as np
from scipy import integrate

from pdmpkit import SimConfig, families as fam, simulate
from pdmpkit.analytic import density_1d_logistic
from pdmpkit.cli.svg import Plot
from pdmpkit.measure import occupation_histogram

CASES = {
    "case1": (0.5, 1.0, 0.05, 2.0, 2.0),
    "case2": (0.5, -0.25, 0.05, 1.0, 2.0),
}


def check(name, params, t_max, out: Path, bins=200):
    d = density_1d_logistic(*params)
    lo = d.support[0]
    h = lambda x: d.h(x, 1) + d.h(x, 2)  # noqa: E731
    # grid up to the first density grid point carrying 99% of the mass below it
    xs = d.grid(400)
    cdf = np.cumsum([integrate.quad(h, a, b)[0] for a, b in zip(xs[:-1], xs[1:])])
    hi = float(xs[1 + np.searchsorted(cdf, 0.99)])
    edges = np.linspace(lo, hi, bins + 1)
    exact = np.array([integrate.quad(h, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    traj = simulate(fam.single_1d(*params), [lo + 1.0], 1, SimConfig(t_max=t_max, record_dt=0.5))
    emp = occupation_histogram(traj, [edges], burn_in=0.1 * t_max).combined
    l1 = float(np.abs(emp - exact).sum())
    with open(out / f"{name}_bins.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lo", "hi", "simulated", "exact"])
        for a, b, s, e in zip(edges[:-1], edges[1:], emp, exact):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(s)), repr(float(e))])
    mid = 0.5 * (edges[:-1] + edges[1:])
    width = np.diff(edges)
    plot = Plot(title=f"{name}: L1 on grid {l1:.4f}", xlabel="x", ylabel="density")
    plot.line(mid, emp / width, color="#1f77b4", label="simulated")
    plot.line(mid, exact / width, color="#d62728", label="closed form")
    plot.save(out / f"{name}.svg")
    print(f"{name}: L1 on [{lo:g}, {hi:.4g}] = {l1:.4f}, masses {np.round(d.masses, 4).tolist()}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tmax", type=float, default=1e5)
    ap.add_argument("--out", type=Path, default=Path("results/density"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, params in CASES.items():
        check(name, params, args.tmax, args.out)
