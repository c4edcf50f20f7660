"""Matplotlib figures for reports, rendered off-screen to image files."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps repeated renders byte-identical
_SAVE_KW = {"metadata": {"Software": None}, "dpi": 110}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_requirement_stages(report, path) -> Path:
    """Frames needed after each stage of the campaign calculation (log scale)."""
    labels = ["base", "statistics", "safety", "final"]
    values = [report.base_frames, report.frames_after_statistics,
              report.frames_after_safety, report.frames_final]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(labels, values, color="#4c72b0")
    ax.set_yscale("log")
    ax.set_ylabel("frames")
    ax.set_title(f"total cost {report.total_cost:.3g}")
    return _save(fig, path)


def plot_k_of_n(empirical, path, theoretical=None) -> Path:
    """Empirical (and optionally independent-model) k-out-of-n accuracy for k = 1..n."""
    ks = list(range(1, len(empirical) + 1))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(ks, empirical, "o-", label="empirical")
    if theoretical is not None:
        ax.plot(ks, theoretical, "s--", label="independent")
        ax.legend()
    ax.set_xticks(ks)
    ax.set_xlabel("k (members required correct)")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    return _save(fig, path)


def plot_entropy_bins(bins, path, title=None) -> Path:
    """Error correlation per entropy bin; degenerate bins are left blank."""
    idx = [b.bin_index for b in bins]
    rho = [math.nan if b.rho is None else b.rho for b in bins]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(idx, rho, color="#dd8452")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(idx)
    ax.set_xlabel("entropy bin (low to high)")
    ax.set_ylabel("error correlation")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_correlation_matrix(names, rho, path) -> Path:
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    data = [[math.nan if v is None else v for v in row] for row in rho]
    im = ax.imshow(data, vmin=-1, vmax=1, cmap="coolwarm")
    ax.set_xticks(range(len(names)), names, rotation=45)
    ax.set_yticks(range(len(names)), names)
    fig.colorbar(im, ax=ax)
    return _save(fig, path)


def plot_sweep(report, path) -> Path:
    """Mean correlation and accuracies against the penalty weight, with 1 SD bars."""
    summary = report.summary()
    lams = [s.lam for s in summary]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.errorbar(lams, [s.mean_rho for s in summary], yerr=[s.mean_rho_std for s in summary],
                 marker="o", capsize=3)
    ax1.set_ylabel("mean pairwise error correlation")
    ax2.errorbar(lams, [s.avg_accuracy for s in summary],
                 yerr=[s.avg_accuracy_std for s in summary], marker="o", capsize=3, label="average")
    ax2.errorbar(lams, [s.joint_accuracy for s in summary],
                 yerr=[s.joint_accuracy_std for s in summary], marker="s", capsize=3, label="joint")
    ax2.set_ylabel("accuracy")
    ax2.legend()
    positive = [v for v in lams if v > 0]
    for ax in (ax1, ax2):
        if positive:
            ax.set_xscale("symlog", linthresh=min(positive))
        ax.set_xlabel("penalty weight lambda")
    return _save(fig, path)


def plot_training_history(history, path) -> Path:
    epochs = [h.epoch for h in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(epochs, [h.train_loss for h in history], label="train")
    ax1.plot(epochs, [h.validation.loss for h in history], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, [h.validation.avg_accuracy for h in history], label="average")
    ax2.plot(epochs, [h.validation.joint_accuracy for h in history], label="joint")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax2.legend()
    return _save(fig, path)
