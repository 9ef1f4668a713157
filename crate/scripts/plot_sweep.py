#!/usr/bin/env python3
"""Plot regret curves from `autobid` output.

    plot_sweep.py sweep OUT_DIR [--save FILE]   log-log mean regret with std bars
    plot_sweep.py trace CSV [--save FILE]       cumulative objective, multipliers, budget
"""
import argparse

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def plot_sweep(out_dir, ax):
    df = pd.read_csv(f"{out_dir}/sweep.csv")
    ax.errorbar(df.horizon, df.mean_regret, yerr=df.std_regret, fmt="o-", capsize=3)
    pos = df[df.mean_regret > 0]
    if len(pos) >= 2:
        slope, icpt = np.polyfit(np.log(pos.horizon), np.log(pos.mean_regret), 1)
        xs = np.geomspace(pos.horizon.min(), pos.horizon.max(), 50)
        ax.plot(xs, np.exp(icpt) * xs**slope, "--", label=f"slope {slope:.3f}")
        ax.legend()
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("mean regret")


def plot_trace(path):
    df = pd.read_csv(path)
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
    axes[0].plot(df.t, df.cum_objective)
    axes[0].set_ylabel("cumulative objective")
    axes[1].plot(df.t, df["lambda"], label="lambda")
    axes[1].plot(df.t, df.mu, label="mu")
    axes[1].legend()
    axes[2].plot(df.t, df.budget_remaining, label="budget left")
    axes[2].plot(df.t, df.roi_slack, label="ROI slack")
    axes[2].legend()
    axes[2].set_xlabel("round")
    return fig


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("kind", choices=["sweep", "trace"])
    p.add_argument("path")
    p.add_argument("--save")
    args = p.parse_args()
    if args.kind == "sweep":
        fig, ax = plt.subplots()
        plot_sweep(args.path, ax)
    else:
        fig = plot_trace(args.path)
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
