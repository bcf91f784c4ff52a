"""Figure rendering for run and sweep artifacts.

Everything draws through the Agg backend straight to files; no interactive
windows. Inputs are the same row dictionaries the CSV writer consumes, so
figures and delimited output always agree.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RATE_KEYS = ("clean_rate", "attacked_rate", "pca_rate", "hbos_rate")
RATE_LABELS = ("clean", "attacked", "after PCA", "after HBOS")


def _group_by_method(rows: list[dict]) -> dict[str, list[dict]]:
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["method"], []).append(row)
    return groups


def plot_rates(rows: list[dict], path: str | Path) -> Path:
    """Grouped bar chart: mean rate per method across seeds."""
    path = Path(path)
    groups = _group_by_method(rows)
    methods = sorted(groups)
    width = 0.8 / len(RATE_KEYS)
    xs = np.arange(len(methods))

    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(methods), 4.0))
    for i, (key, label) in enumerate(zip(RATE_KEYS, RATE_LABELS)):
        means = [np.mean([r[key] for r in groups[m]]) for m in methods]
        ax.bar(xs + (i - 1.5) * width, means, width, label=label)
    ax.set_xticks(xs)
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_ylabel("misclassification rate (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_loss_traces(traces: dict[int, list[float]], path: str | Path) -> Path:
    """Attack loss per iteration, one line per seed."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for seed in sorted(traces):
        trace = traces[seed]
        if trace:
            ax.plot(range(len(trace)), trace, label=f"seed {seed}", linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("attack loss")
    if traces:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(rows: list[dict], axis: str, path: str | Path) -> Path:
    """Attacked rate against the swept axis: per-seed points plus the median."""
    path = Path(path)
    key = {"eta": "eta", "kernel": "kernel", "elite_method": "method"}[axis]
    values = sorted({row[key] for row in rows})
    positions = {v: i for i, v in enumerate(values)}

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for row in rows:
        ax.scatter(positions[row[key]], row["attacked_rate"], color="C0", s=14, alpha=0.5)
    medians = [
        float(np.median([r["attacked_rate"] for r in rows if r[key] == v]))
        for v in values
    ]
    ax.plot(range(len(values)), medians, color="C1", marker="o", label="median")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels([str(v) for v in values], rotation=20, ha="right")
    ax.set_xlabel(axis)
    ax.set_ylabel("attacked misclassification rate (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
