"""Figure rendering for experiment reports.

Every function takes a report object and writes PNG files next to the
delimited output, returning the paths it created.  Rendering is
deterministic for identical reports.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .case1 import Experiment1Report, parity_label, stable_region
from .case2 import FAMILY_HAT, FAMILY_TILDE, StripeSpec, render


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def experiment1_predictions(report: Experiment1Report, out_dir) -> Path:
    """Grid-of-panels view: truth vs predictions on both diagnostic grids."""
    diag = report.diag
    results = report.results
    fig, axes = plt.subplots(2, len(results), sharex=True, sharey=True,
                             figsize=(3.2 * len(results), 4.6))
    axes = np.atleast_2d(axes)
    if axes.shape[0] != 2:
        axes = axes.T
    for col, res in enumerate(results):
        for row, (tag, preds) in enumerate(
            (("C0", res.pred_c0), ("Cdelta", res.pred_cdelta))
        ):
            ax = axes[row, col]
            ax.plot(diag.x1, diag.labels, lw=1.0, color="0.65", label="truth")
            ax.plot(diag.x1, preds, lw=0.9, color="tab:red", label="prediction")
            if row == 0:
                ax.set_title(f"{res.spec.name} ({res.spec.set_label})", fontsize=9)
            if col == 0:
                ax.set_ylabel(tag)
            ax.set_yticks([0, 1])
    axes[0, 0].legend(fontsize=7, loc="center left")
    for ax in axes[1, :]:
        ax.set_xlabel("x1")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "fig_predictions.png")


def experiment1_losses(report: Experiment1Report, out_dir) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for res in report.results:
        ax.plot(res.epoch_mean_loss, lw=0.8,
                label=f"{res.spec.name} ({res.spec.set_label})")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean batch cross-entropy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "fig_loss.png")


def experiment2_accuracy(report, out_dir) -> Path:
    """Accuracy of the best-seed network and the pixel-sum rule per (b, c) row."""
    rows = report.rows_for_seed(report.best_seed)
    labels = [f"[{r.b:g},{r.c:g}]" for r in rows]
    xs = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    ax.plot(xs, [r.acc_tilde for r in rows], "o-", label="net, sum-aligned")
    ax.plot(xs, [r.acc_hat for r in rows], "s-", label="net, sum-inverted")
    ax.plot(xs, [r.acc_g_tilde for r in rows], "^--", label="pixel-sum rule, aligned")
    ax.plot(xs, [r.acc_g_hat for r in rows], "v--", label="pixel-sum rule, inverted")
    ax.set_xticks(xs, labels)
    ax.set_xlabel("contrast range [b, c]")
    ax.set_ylabel("accuracy")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"best seed {report.best_seed}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "fig_accuracy.png")


def experiment2_samples(out_dir, a: float = 0.0095, n_pairs: int = 4) -> Path:
    """Example stripes rendered in both color codes (visually identical pairs)."""
    fig, axes = plt.subplots(2, n_pairs, figsize=(2.1 * n_pairs, 4.4))
    for i in range(n_pairs):
        orientation = "vertical" if i % 2 else "horizontal"
        for row, family in enumerate((FAMILY_TILDE, FAMILY_HAT)):
            img = render(StripeSpec(orientation, 4 + 6 * i, family, a))
            ax = axes[row, i]
            ax.imshow(img, cmap="gray", vmin=-0.01, vmax=1.01)
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_ylabel("sum-aligned" if row == 0 else "sum-inverted",
                              fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "fig_samples.png")


def stable_network_response(problem, net, out_dir, grid_n: int = 4000) -> Path:
    """Logit curve of the constructed network over x1 with the stable region shaded."""
    x1 = np.linspace(problem.b, 1.0, grid_n)
    pts = np.column_stack([x1, np.full_like(x1, 0.5)])
    logits = net.forward(pts)[:, 0]
    labels = parity_label(problem, x1)
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.5, 4.6))
    for lo, hi in stable_region(problem):
        top.axvspan(lo, hi, color="tab:green", alpha=0.15, lw=0)
        bottom.axvspan(lo, hi, color="tab:green", alpha=0.15, lw=0)
    top.plot(x1, logits, lw=0.9)
    top.axhline(0.0, color="0.4", lw=0.6)
    top.set_ylabel("logit")
    bottom.plot(x1, labels, lw=1.0, color="0.65", label="truth")
    bottom.plot(x1, (logits >= 0).astype(int), lw=0.8, color="tab:red",
                label="rounded prediction")
    bottom.set_yticks([0, 1])
    bottom.set_xlabel("x1")
    bottom.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "fig_stable_logit.png")
