"""Matplotlib figures for iteration logs and benchmark tables.

Everything renders to files through the Agg backend, so no display is
needed.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RESIDUAL_KEYS = ("etaP", "etaD", "etaC", "etaGap")


def plot_convergence(rows: Sequence[Mapping], path, title: str = "") -> str:
    """Semilog plot of the relative residuals against the iteration count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    k = [r["k"] for r in rows]
    for key in RESIDUAL_KEYS:
        vals = np.array([float(r[key]) for r in rows])
        # zeros cannot be drawn on a log axis
        ax.semilogy(k, np.where(vals > 0, vals, np.nan), label=key)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return os.fspath(path)


def plot_bench(rows: Iterable[Mapping], path) -> str:
    """Grouped bars of iteration counts and times, one group per dataset/q.

    ``rows`` are bench CSV records; failed runs (empty Iter) are skipped.
    """
    rows = [r for r in rows if str(r.get("Iter", "")).strip() not in ("", "nan")]
    groups = sorted({(r["Data"], r["q"]) for r in rows})
    variants = sorted({r["variant"] for r in rows})
    fig, (ax_it, ax_t) = plt.subplots(1, 2, figsize=(10, 4))
    x = np.arange(len(groups))
    width = 0.8 / max(1, len(variants))
    for j, var in enumerate(variants):
        lookup = {(r["Data"], r["q"]): r for r in rows if r["variant"] == var}
        its = [float(lookup[g]["Iter"]) if g in lookup else np.nan for g in groups]
        ts = [float(lookup[g]["Time"]) if g in lookup else np.nan for g in groups]
        ax_it.bar(x + j * width, its, width, label=var)
        ax_t.bar(x + j * width, ts, width, label=var)
    labels = [f"{name}\nq={q}" for name, q in groups]
    for ax, ylabel in ((ax_it, "iterations"), (ax_t, "time (s)")):
        ax.set_xticks(x + width * (len(variants) - 1) / 2)
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylabel(ylabel)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return os.fspath(path)
