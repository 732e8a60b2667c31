"""Figures written next to CLI reports (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def hop_cdf(series: dict, path: str, title: str = "delivered within h hops"):
    """``series`` maps a label to ``{hops: cumulative mass}``."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, cdf in series.items():
        hs = sorted(cdf)
        ax.step(hs, [float(cdf[h]) for h in hs], where="post", label=label, marker="o", ms=3)
    ax.set_xlabel("hop count")
    ax.set_ylabel("fraction of traffic")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def runtime_scaling(ks, seconds, path: str, xlabel: str = "diamonds k"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(ks, seconds, marker="o", base=2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("seconds")
    ax.set_title("compile + query time")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def delivery_bars(labels, values, path: str, title: str = "delivery probability"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(labels, [float(v) for v in values])
    lo = min(float(v) for v in values)
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
