"""Matplotlib renderings of the report CSVs (written alongside them)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .interrogate import BAND_LABELS, PerturbationCurve  # noqa: E402


def plot_perturbation_curves(curve: PerturbationCurve, path) -> None:
    """Px - Po elevation per band, one line per interpolation weight."""
    alphas = sorted({alpha for alpha, _ in curve.points})
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(BAND_LABELS))
    for alpha in alphas:
        ys = [curve.mean(alpha, label) for label in BAND_LABELS]
        ax.plot(xs, ys, marker="o", label=f"alpha={alpha:g}")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(BAND_LABELS, rotation=30, ha="right")
    ax.set_xlabel("log frequency band")
    ax.set_ylabel("perplexity elevation over baseline (Px - Po)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_score_separation(scores, path) -> None:
    """Histogram of the paired-perplexity difference by group."""
    cases = [s.diff for s in scores if s.is_case]
    controls = [s.diff for s in scores if not s.is_case]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(controls, bins=30, alpha=0.6, label="control")
    ax.hist(cases, bins=30, alpha=0.6, label="dementia")
    ax.set_xlabel("p_con - p_model")
    ax.set_ylabel("transcripts")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_narrative_frequencies(labels, means, path) -> None:
    """Mean log lexical frequency per narrative/band."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(labels)), means, marker="s")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_xlabel("narrative")
    ax.set_ylabel("mean log10 lexical frequency")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
