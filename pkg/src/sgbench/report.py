"""Rendering of scorecards and timing benchmarks to files.

Figures use the Agg backend so rendering works headless; every figure
is written next to a CSV with the same numbers, so downstream tooling
never has to scrape pixels.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import CELLS

_CELL_COLORS = {
    "commit_correct": "#2a9d2a",
    "commit_wrong": "#c43b3b",
    "abstain_correct": "#7cb7e8",
    "abstain_wrong": "#e8a33d",
}


def write_scores_csv(rows, path) -> None:
    """rows: iterables of (instance_id, family, cell, reason)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "family", "cell", "reason"])
        writer.writerows(rows)


def render_scorecard_figure(scorecard, path) -> None:
    """Stacked per-family bar chart of the four outcome cells."""
    families = sorted(scorecard.per_family) or ["(none)"]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(families) + 2.0), 3.6))
    bottoms = [0] * len(families)
    for cell in CELLS:
        heights = [scorecard.per_family.get(f, {}).get(cell, 0) for f in families]
        ax.bar(families, heights, bottom=bottoms, label=cell,
               color=_CELL_COLORS[cell])
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_ylabel("instances")
    ax.set_title(f"outcomes over {scorecard.n} answers")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_bench_csv(rows, path) -> None:
    """rows: iterables of (label, calls, total_seconds, per_call_us)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "calls", "total_seconds", "per_call_us"])
        writer.writerows(rows)


def render_bench_figure(rows, path) -> None:
    """Horizontal bars of per-call latency, log scale."""
    rows = list(rows)
    labels = [r[0] for r in rows]
    values = [float(r[3]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 0.6 * len(rows) + 1.6))
    ax.barh(labels, values, color="#4a6fa5")
    ax.set_xlabel("microseconds per call")
    if values and max(values) / max(min(values), 1e-9) > 100:
        ax.set_xscale("log")
    ax.set_title("scoring path latency")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
