"""Report figures rendered to PNG files next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_lambda_curve(trials, lambda_opt: float, path) -> None:
    """Labeled accuracy across the weight grid, with the selected value marked."""
    lams = [t.lam for t in trials]
    accs = [t.labeled_acc for t in trials]
    finals = [t.final_g for t in trials]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lams, accs, "o-", color="#215CAF", label="labeled accuracy")
    ax.axvline(lambda_opt, color="#B7352D", linestyle="--", label=f"selected = {lambda_opt:.4g}")
    ax.set_xlabel("entropy weight")
    ax.set_ylabel("labeled accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax2 = ax.twinx()
    ax2.plot(lams, finals, "s--", color="#8E6713", alpha=0.6, label="final objective")
    ax2.set_ylabel("final objective")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ksearch_trace(trace, k_hat: int, path) -> None:
    """Labeled accuracy at every probed cluster count."""
    ks = [k for k, _ in trace]
    accs = [a for _, a in trace]
    order = np.argsort(ks)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(ks)[order], np.asarray(accs)[order], "o-", color="#215CAF")
    ax.axvline(k_hat, color="#B7352D", linestyle="--", label=f"estimate = {k_hat}")
    ax.set_xlabel("cluster count")
    ax.set_ylabel("labeled accuracy")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_class_frequencies(counts, path) -> None:
    """Per-class sample counts in sorted order."""
    counts = np.sort(np.asarray(counts))[::-1]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(counts.size), counts, color="#215CAF")
    ax.set_xlabel("class (sorted by frequency)")
    ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
