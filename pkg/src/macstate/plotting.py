"""Region figures rendered next to the delimited outputs."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .rateregion import RateRegion

_GOLDEN = (math.sqrt(5) - 1.0) / 2.0


def plot_regions(regions: list[tuple[str, RateRegion]], path: str | Path,
                 title: str | None = None) -> Path:
    """Draw frontier polylines for one or more regions and save the figure."""
    path = Path(path)
    width = 6.4
    fig, ax = plt.subplots(figsize=(width, width * _GOLDEN), dpi=150)
    for label, region in regions:
        if region.is_empty:
            continue
        xs = [p.r1 for p in region.boundary]
        ys = [p.r2 for p in region.boundary]
        ax.plot(xs, ys, lw=1.6, label=label)
    ax.set_xlabel(r"$R_1$ [bits/use]")
    ax.set_ylabel(r"$R_2$ [bits/use]")
    if title:
        ax.set_title(title)
    ax.grid(True, linestyle="--", alpha=0.5)
    if len(regions) > 1:
        ax.legend(fontsize=8)
    ax.set_xlim(left=0.0)
    ax.set_ylim(bottom=0.0)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_error_curves(rows: list[dict], path: str | Path, title: str | None = None) -> Path:
    """Error rate vs blocklength for the simulation report."""
    path = Path(path)
    width = 6.4
    fig, ax = plt.subplots(figsize=(width, width * _GOLDEN), dpi=150)
    ns = [r["n"] for r in rows]
    errs = [r["error_rate"] for r in rows]
    cis = [r["ci95"] for r in rows]
    ax.errorbar(ns, errs, yerr=cis, fmt="o-", capsize=3)
    ax.set_xlabel("blocklength $n$")
    ax.set_ylabel("error rate")
    ax.set_ylim(0.0, 1.05)
    if title:
        ax.set_title(title)
    ax.grid(True, linestyle="--", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
