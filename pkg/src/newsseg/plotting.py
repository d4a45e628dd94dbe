"""Figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .timeline import LABELS  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # fixed metadata keeps PNG output byte-stable across runs
    "svg.hashsalt": "newsseg",
}

SHORT = {"Advertisement": "Adv.", "Story": "Story", "Studio": "Studio", "Transition": "Tran.", "Visualisation": "Vis."}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def figure_path(report_path, suffix: str) -> Path:
    """``report.csv`` -> ``report_<suffix>.png`` in the same directory."""
    p = Path(report_path)
    return p.with_name(f"{p.stem}_{suffix}.png")


def plot_confusion(cm, path, title: str = "") -> Path:
    """Heatmap of seconds, rows = predicted, columns = annotated.

    Cells are shaded by column share (recall-style) and annotated in minutes.
    """
    secs = cm.seconds()
    col = secs.sum(axis=0, keepdims=True)
    share = np.divide(secs, col, out=np.zeros_like(secs), where=col > 0)
    names = [SHORT[lab.value] for lab in LABELS]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        im = ax.imshow(share, cmap="Blues", vmin=0, vmax=1)
        for i in range(len(LABELS)):
            for j in range(len(LABELS)):
                color = "white" if share[i, j] > 0.6 else "black"
                ax.text(j, i, f"{secs[i, j] / 60:.1f}", ha="center", va="center", color=color, fontsize=7)
        ax.set_xticks(range(len(LABELS)), names)
        ax.set_yticks(range(len(LABELS)), names)
        ax.set_xlabel("Annotated")
        ax.set_ylabel("Predicted")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04, label="share of annotated duration")
        return _save(fig, path)


def plot_class_distribution(dist, path) -> Path:
    names = [SHORT[lab.value] for lab in LABELS]
    clips = [dist.stats[lab].clip_count for lab in LABELS]
    hours = [dist.stats[lab].total_duration_h for lab in LABELS]
    with plt.rc_context(RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(6.4, 2.6))
        a1.bar(names, clips, color="0.35")
        a1.set_ylabel("clips")
        a2.bar(names, hours, color="tab:blue")
        a2.set_ylabel("total duration (h)")
        for ax in (a1, a2):
            ax.tick_params(axis="x", rotation=30)
        fig.tight_layout()
        return _save(fig, path)


def plot_training(records: Sequence, path) -> Path:
    epochs = [r.epoch for r in records]
    with plt.rc_context(RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(6.4, 2.6))
        a1.plot(epochs, [r.train_loss for r in records], label="train")
        a1.plot(epochs, [r.val_loss for r in records], label="val")
        a1.set_xlabel("epoch")
        a1.set_ylabel("cross-entropy")
        a1.legend(frameon=False)
        a2.plot(epochs, [r.train_acc for r in records], label="train")
        a2.plot(epochs, [r.val_acc for r in records], label="val")
        a2.set_xlabel("epoch")
        a2.set_ylabel("accuracy")
        a2.set_ylim(0, 1.02)
        fig.tight_layout()
        return _save(fig, path)


def plot_shot_scores(scores: Sequence[float], boundaries: Sequence[int], threshold: float, path) -> Path:
    """Content score per frame transition, with the threshold and declared cuts."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6.4, 2.2))
        ax.plot(np.arange(1, len(scores) + 1), scores, lw=0.7, color="0.3")
        ax.axhline(threshold, color="tab:red", lw=0.8, ls="--")
        for b in boundaries:
            ax.axvline(b, color="tab:blue", lw=0.5, alpha=0.6)
        ax.set_xlabel("frame")
        ax.set_ylabel("content score")
        return _save(fig, path)
