#!/usr/bin/env python3
"""Plot det C(t) for the reference qubit from the CSV written by `hybridmap fig1`.

Usage: hybridmap fig1 -o fig1.csv && python3 scripts/plot_fig1.py fig1.csv fig1.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

LABELS = {
    "detC_gz0": r"$\gamma_z = 0$",
    "detC_gz0p1": r"$\gamma_z = 0.1$",
    "detC_gz1": r"$\gamma_z = 1$",
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("output")
    args = parser.parse_args()

    data = pd.read_csv(args.csv)
    fig, ax = plt.subplots(figsize=(6, 4))
    for column, label in LABELS.items():
        ax.plot(data["t"], data[column], label=label)
    ax.axhline(0.0, color="black", linewidth=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\det C(t)$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
