#!/usr/bin/env python3
"""Scatter plot of an exported projection frame (CSV written by `repgeo export-frame`)."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def read_frame(path):
    with open(path) as f:
        axes_line = f.readline().strip()
    roles = {}
    if axes_line.startswith("# axes:"):
        for item in axes_line[len("# axes:"):].strip().split(";"):
            name, _, spec = item.partition("=")
            roles[name] = spec.split("@")[0]
    return pd.read_csv(path, skiprows=1, keep_default_na=False), roles


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("frame")
    p.add_argument("--out", default="frame.png")
    p.add_argument("--color-by", default="language", choices=["language", "family", "position", "tags"])
    p.add_argument("--x", default="c1")
    p.add_argument("--y", default="c2")
    args = p.parse_args()

    df, roles = read_frame(args.frame)
    fig, ax = plt.subplots(figsize=(7, 6))
    if args.color_by == "position":
        sc = ax.scatter(df[args.x], df[args.y], c=df["position"], s=4, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="position")
    else:
        for key, group in df.groupby(args.color_by):
            ax.scatter(group[args.x], group[args.y], s=4, label=key or "(none)")
        ax.legend(markerscale=3, fontsize="small", ncol=2)
    ax.set_xlabel(f"{args.x} ({roles.get(args.x, '?')})")
    ax.set_ylabel(f"{args.y} ({roles.get(args.y, '?')})")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
