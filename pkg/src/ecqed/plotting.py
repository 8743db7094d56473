"""Figures for corpus statistics, evaluation reports, training curves and throughput."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

LEVELS = ("quad", "pair", "emotion", "cause", "quad_overlap")


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def distance_buckets(histogram, cap=4):
    """Collapse distances above ``cap - 1`` into one ``>=cap`` bucket."""
    out = {str(k): 0 for k in range(cap)}
    out[f">={cap}"] = 0
    for k, v in histogram.items():
        k = int(k)
        out[str(k) if k < cap else f">={cap}"] += v
    return out


def plot_corpus_stats(stats, out_dir):
    """Overlap ratio and cross-utterance distance panels, plus type counts. Returns the paths."""
    out_dir = Path(out_dir)
    paths = []
    with plt.rc_context(STYLE):
        fig, (ax_a, ax_b) = plt.subplots(1, 2, figsize=(7, 2.8))
        ratio = stats.overlap_dialog_ratio
        ax_a.bar(["overlapped", "not overlapped"], [ratio, 1 - ratio], color=["#c44e52", "#8c8c8c"])
        ax_a.set_ylim(0, 1)
        ax_a.set_ylabel("fraction of dialogs")
        ax_a.set_title("(a) dialogs with overlapped quadruples")
        buckets = distance_buckets(stats.distance_histogram)
        total = sum(buckets.values()) or 1
        ax_b.bar(list(buckets), [v / total for v in buckets.values()], color="#4c72b0")
        ax_b.set_xlabel("emotion index - cause index")
        ax_b.set_ylabel("fraction of quadruples")
        ax_b.set_title("(b) cause distance")
        paths.append(_save(fig, out_dir / "overlap_distance.png"))

        fig, (ax_e, ax_c) = plt.subplots(1, 2, figsize=(7, 2.8))
        ax_e.bar(list(stats.emotion_type_counts), list(stats.emotion_type_counts.values()), color="#55a868")
        ax_e.set_title("emotion types")
        ax_e.tick_params(axis="x", rotation=30)
        ax_c.bar(list(stats.cause_type_counts), list(stats.cause_type_counts.values()), color="#8172b2")
        ax_c.set_title("cause types")
        ax_c.tick_params(axis="x", rotation=30)
        paths.append(_save(fig, out_dir / "type_counts.png"))
    return paths


def plot_eval_report(report, path):
    import numpy as np

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 2.8))
        x = np.arange(len(LEVELS))
        for off, (name, attr) in zip((-0.25, 0, 0.25), (("P", "precision"), ("R", "recall"), ("F1", "f1"))):
            ax.bar(x + off, [getattr(getattr(report, lvl), attr) for lvl in LEVELS], width=0.25, label=name)
        ax.set_xticks(x, LEVELS)
        ax.set_ylim(0, 1.05)
        ax.legend(ncols=3, loc="upper center", bbox_to_anchor=(0.5, 1.18), frameon=False)
        return _save(fig, path)


def plot_loss_curve(loss_curve, val_curve, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 2.8))
        epochs = range(1, len(loss_curve) + 1)
        ax.plot(epochs, loss_curve, color="#4c72b0", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        if any(v is not None for v in val_curve):
            ax2 = ax.twinx()
            ax2.plot(epochs, [float("nan") if v is None else v for v in val_curve], color="#c44e52", label="val quad F1")
            ax2.set_ylim(0, 1.05)
            ax2.set_ylabel("val quad F1")
        return _save(fig, path)


def plot_throughput(rates, path):
    """Bar chart of utterances/second; ``rates`` maps label -> speed."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.bar(list(rates), list(rates.values()), color="#dd8452")
        ax.set_ylabel("utterances / s")
        return _save(fig, path)
