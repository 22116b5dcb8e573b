#!/usr/bin/env python3
"""Plot AIR versus launch power from a `fiberair sweep` CSV."""

import argparse
import csv
import math
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_rows(path):
    series = defaultdict(list)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            air = float(row["air_bits"])
            if math.isnan(air):
                continue
            series[row["config"]].append(
                (float(row["power_dbm"]), air, float(row["std_err"]))
            )
    for pts in series.values():
        pts.sort()
    return series


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", default="air.png")
    ap.add_argument("--benchmark", default="benchmark", help="label of the reference curve")
    args = ap.parse_args()

    series = read_rows(args.csv)
    if not series:
        sys.exit("no valid rows in " + args.csv)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(series):
        p, a, e = zip(*series[label])
        style = dict(lw=2.2, color="tab:red") if label == args.benchmark else dict(lw=1.4)
        ax.errorbar(p, a, yerr=e, marker="o", ms=3, capsize=2, label=label, **style)
        k = max(range(len(a)), key=a.__getitem__)
        ax.plot(p[k], a[k], marker="*", ms=11, color="k", zorder=5)
        print(f"peak {label}: {a[k]:.4f} bits/sym/pol at {p[k]:g} dBm")

    ax.set_xlabel("launch power per channel per polarization [dBm]")
    ax.set_ylabel("AIR [bits/sym/pol]")
    ax.grid(True, alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print("wrote " + args.output)


if __name__ == "__main__":
    main()
