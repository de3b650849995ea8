"""PNG report figures.

Everything renders through the Agg backend with fixed sizes and no
timestamp metadata, so reruns produce identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}
# strips the version string and creation time matplotlib writes by default
_METADATA = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_METADATA)
    plt.close(fig)
    return path


def far_frr_figure(thresholds, far, frr, eer_value, tau, path, title="FAR / FRR"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(thresholds, far, label="FAR", color="tab:red")
        ax.plot(thresholds, frr, label="FRR", color="tab:blue")
        ax.axvline(tau, color="0.4", lw=0.8, ls="--")
        ax.plot([tau], [eer_value], "ko", ms=4)
        ax.annotate(f"EER {eer_value:.3f} at {tau:.2f}", (tau, eer_value), xytext=(6, 6),
                    textcoords="offset points")
        ax.set(xlabel="threshold", ylabel="rate", xlim=(0, 1), ylim=(-0.02, 1.02), title=title)
        ax.legend()
        return _save(fig, path)


def sweep_figure(sizes, eers_by_metric: dict, path, title="EER vs sample size"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, values in eers_by_metric.items():
            ax.plot(sizes, values, marker="o", ms=3, label=name)
        ax.set(xlabel="sample size (frames)", ylabel="mean EER", title=title)
        ax.set_ylim(bottom=0)
        ax.legend()
        return _save(fig, path)


def identification_figure(ks, accuracies, path, title="Identification accuracy"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ks, accuracies, marker="o", ms=3)
        ax.set(xlabel="training samples per user", ylabel="accuracy", ylim=(0, 1.02), title=title)
        ax.set_xticks(list(ks))
        return _save(fig, path)


def attack_figure(labels, baseline, accept, path, title="Attacker accept rate"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(labels))
        ax.bar(x - 0.2, baseline, width=0.4, label="zero-effort EER", color="0.6")
        ax.bar(x + 0.2, accept, width=0.4, label="attacker accept rate", color="tab:red")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=90 if len(labels) > 8 else 0)
        ax.set(ylabel="rate", ylim=(0, 1.02), title=title)
        ax.legend()
        return _save(fig, path)


def imitation_figure(alphas, accept, baseline, path, title="Imitation attack"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(alphas, accept, marker="o", ms=3, color="tab:red", label="accept rate")
        ax.axhline(baseline, color="0.4", ls="--", lw=0.8, label="zero-effort EER")
        ax.set(xlabel="imitation fidelity", ylabel="rate", xlim=(-0.02, 1.02), ylim=(0, 1.02), title=title)
        ax.legend()
        return _save(fig, path)
