"""Matplotlib renderings written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_pr_curves(report, path) -> None:
    """One PR curve per IoU threshold of the evaluation ladder."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for t, points in sorted(report.pr_curves.items()):
        if not points:
            continue
        recalls = [r for r, _ in points]
        precisions = [p for _, p in points]
        ax.plot(recalls, precisions, label=f"IoU {t:.2f}", linewidth=1.2)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(f"mAP50 {report.map50:.3f} / mAP50-95 {report.map50_95:.3f}")
    ax.grid(alpha=0.3)
    if any(report.pr_curves.values()):
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_re_curves(rst_results, path) -> None:
    """Rough-entropy curves with the chosen thresholds marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for res in rst_results:
        curve = res.curve
        ax.plot(np.arange(256), curve.entropy, label=f"{curve.polarity} (T*={res.t_star})")
        ax.axvline(res.t_star, color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel("Threshold T")
    ax.set_ylabel("Rough entropy")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confidence(values: np.ndarray, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(values, cmap="magma", interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
