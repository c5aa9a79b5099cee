#!/usr/bin/env python3
"""
Plot CLI outputs: consensus trajectories, paired spread curves and bench sweeps.

Usage:
    python docs/plot_results.py traj.csv                  # y_i(t) and spread
    python docs/plot_results.py traj_paired.csv --paired  # global vs local spread
    python docs/plot_results.py bench.csv --bench         # wallclock against |E| and K

Needs matplotlib (commented out in requirements.txt).
"""

import argparse
import sys

import matplotlib.pyplot as plt
import pandas as pd


def read_output(path: str) -> pd.DataFrame:
    """CLI CSVs start with a '# config:' line"""
    return pd.read_csv(path, comment='#')


def plot_trajectory(df: pd.DataFrame, ax_values, ax_spread):
    for column in [c for c in df.columns if c.startswith('y_')]:
        ax_values.plot(df['t'], df[column], linewidth=0.8)
    ax_values.set_xlabel('t')
    ax_values.set_ylabel('y_i(t)')

    ax_spread.semilogy(df['t'], df['spread'].clip(lower=1e-16))
    ax_spread.set_xlabel('t')
    ax_spread.set_ylabel('max - min')


def plot_paired(df: pd.DataFrame, ax):
    names = sorted({c.rsplit('_', 2)[0] for c in df.columns if c.endswith('_global_spread')})
    for name in names:
        ax.semilogy(df['t'], df[f"{name}_global_spread"].clip(lower=1e-16), label=f"{name} global")
        ax.semilogy(df['t'], df[f"{name}_local_spread"].clip(lower=1e-16), '--', label=f"{name} local")
    ax.set_xlabel('t')
    ax.set_ylabel('spread')
    ax.legend()


def plot_bench(df: pd.DataFrame, ax_central, ax_hlnc):
    central = df[(df['planner'] == 'centralized') & (df['status'] == 'ok')]
    ax_central.semilogy(central['edges'], central['wallclock_ms'], 'o-')
    dnf = df[(df['planner'] == 'centralized') & (df['status'] == 'DNF')]
    for m in dnf['edges']:
        ax_central.axvline(m, color='gray', linestyle=':')
    ax_central.set_xlabel('|E|')
    ax_central.set_ylabel('centralized wallclock (ms)')

    hlnc = df[df['planner'] == 'hlnc']
    ax_hlnc.plot(hlnc['K'], hlnc['wallclock_ms'], 'o-')
    ax_hlnc.set_xlabel('K')
    ax_hlnc.set_ylabel('HLNC wallclock (ms)')


def main():
    parser = argparse.ArgumentParser(description='Plot LNC planner outputs')
    parser.add_argument('csv', help='CSV written by simulate or bench')
    parser.add_argument('--paired', action='store_true', help='Paired simulation CSV')
    parser.add_argument('--bench', action='store_true', help='Benchmark CSV')
    parser.add_argument('-o', '--output', help='Save instead of showing')
    args = parser.parse_args()

    df = read_output(args.csv)
    if args.paired:
        fig, ax = plt.subplots(1, 1, figsize=(6, 4))
        plot_paired(df, ax)
    elif args.bench:
        fig, axs = plt.subplots(1, 2, figsize=(10, 4))
        plot_bench(df, *axs)
    else:
        fig, axs = plt.subplots(1, 2, figsize=(10, 4))
        plot_trajectory(df, *axs)
    plt.tight_layout()

    if args.output:
        fig.savefig(args.output, dpi=150)
        print(f"Saved {args.output}")
    else:
        plt.show()
    return 0


if __name__ == '__main__':
    sys.exit(main())
