"""Figure rendering for the CLI report paths.

Every function draws from the same row/trace structures the CSV writers
consume and saves straight to a file; the CSV remains the authoritative
output, the figures are a reading aid.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_power_sweep",
    "plot_cdf",
    "plot_element_sweep",
    "plot_convergence",
    "plot_trace",
]

_MARKERS = ("o", "s", "^", "d", "v", "*", "x")


def _finished(rows):
    return [r for r in rows if not np.isnan(r.sum_rate)]


def _labels_in_order(rows):
    labels = []
    for row in rows:
        if row.architecture not in labels:
            labels.append(row.architecture)
    return labels


def plot_power_sweep(rows, path):
    """Mean sum-rate versus transmit power, one curve per architecture."""
    rows = _finished(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, marker in zip(_labels_in_order(rows), _MARKERS):
        sub = [r for r in rows if r.architecture == label and r.algorithm == "cga"]
        grid = sorted({r.p_max_dbm for r in sub})
        means = [
            np.mean([r.sum_rate for r in sub if r.p_max_dbm == p]) for p in grid
        ]
        ax.plot(grid, means, marker=marker, label=label)
    ax.set_xlabel("Maximum transmit power (dBm)")
    ax.set_ylabel("Sum-rate (bits/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cdf(curves, path):
    """Empirical CDF of per-trial sum-rates, one curve per architecture."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for (label, rates), marker in zip(curves.items(), _MARKERS):
        rates = np.asarray(rates)
        fractions = np.arange(1, rates.size + 1) / rates.size
        ax.step(rates, fractions, where="post", marker=marker, markevery=max(rates.size // 10, 1), label=label)
    ax.set_xlabel("Sum-rate (bits/s/Hz)")
    ax.set_ylabel("Empirical CDF")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_element_sweep(rows, path):
    """Mean sum-rate versus element count, one curve per architecture."""
    rows = _finished(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, marker in zip(_labels_in_order(rows), _MARKERS):
        sub = [r for r in rows if r.architecture == label and r.algorithm == "cga"]
        grid = sorted({r.elements for r in sub})
        means = [np.mean([r.sum_rate for r in sub if r.elements == n]) for n in grid]
        ax.plot(grid, means, marker=marker, label=label)
    ax.set_xlabel("Number of reflective elements")
    ax.set_ylabel("Sum-rate (bits/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_convergence(traces, path):
    """Objective versus iteration for each architecture's single run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for (label, trace), marker in zip(traces.items(), _MARKERS):
        objectives = trace.objectives()
        iters = np.arange(objectives.size)
        ax.plot(
            iters,
            objectives,
            marker=marker,
            markevery=max(objectives.size // 12, 1),
            label=label,
        )
    ax.set_xlabel("Iteration")
    ax.set_ylabel("Penalized objective (bits/s/Hz)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trace(trace, path, label="run"):
    plot_convergence({label: trace}, path)
