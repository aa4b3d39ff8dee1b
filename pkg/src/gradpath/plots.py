"""Render accuracy/loss curves from a comparison run to image files.

The CSV is the contract; these figures are the human-readable report that
lands next to it (test-accuracy and train-accuracy curves per architecture,
plus the loss curves).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .train import read_metrics_csv  # noqa: E402

_STYLES = {"baseline": dict(color="tab:orange", marker="o"),
           "dualpath": dict(color="tab:green", marker="s")}


def _series(rows, arch, attr):
    sel = [r for r in rows if r.arch == arch]
    return [r.epoch for r in sel], [getattr(r, attr) for r in sel]


def _curve_figure(rows, attr, ylabel, title, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for arch in ("baseline", "dualpath"):
        epochs, values = _series(rows, arch, attr)
        if epochs:
            ax.plot(epochs, values, label=arch, **_STYLES[arch])
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison_figures(rows, out_dir, stem="comparison"):
    """Write the per-arm curve figures; returns the created file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []

    path = out_dir / f"{stem}_test_accuracy.png"
    _curve_figure(rows, "test_acc", "test accuracy", "Test accuracy per epoch", path)
    made.append(path)

    path = out_dir / f"{stem}_train_accuracy.png"
    _curve_figure(rows, "train_acc", "train accuracy", "Train accuracy per epoch", path)
    made.append(path)

    path = out_dir / f"{stem}_loss.png"
    fig, ax = plt.subplots(figsize=(6, 4))
    for arch in ("baseline", "dualpath"):
        epochs, tr = _series(rows, arch, "train_loss")
        _, te = _series(rows, arch, "test_loss")
        if epochs:
            color = _STYLES[arch]["color"]
            ax.plot(epochs, tr, label=f"{arch} train", color=color)
            ax.plot(epochs, te, label=f"{arch} test", color=color, linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy loss")
    ax.set_title("Loss per epoch")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    made.append(path)
    return made


def render_from_csv(csv_path, out_dir=None, stem=None):
    csv_path = Path(csv_path)
    rows = read_metrics_csv(csv_path)
    return render_comparison_figures(rows, out_dir or csv_path.parent,
                                     stem or csv_path.stem)
