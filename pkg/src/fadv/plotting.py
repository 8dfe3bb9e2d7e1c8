"""PNG renderings of the CSV/JSONL outputs. Only the CLI imports this module."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def _bars(ax, labels, series: dict):
    x = np.arange(len(labels))
    width = 0.8 / len(series)
    for k, (name, values) in enumerate(series.items()):
        ax.bar(x + (k - (len(series) - 1) / 2) * width, [100 * v for v in values], width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    ax.legend(frameon=False)


def plot_defense(rows, path) -> None:
    """Clean accuracy and robust accuracy per (defense, attack) row."""
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows) + 2), 3.5))
    labels = [f"{r['defense']}\n{r['attack']}" for r in rows]
    _bars(ax, labels, {"clean": [r["clean"] for r in rows], "robust": [r["ra"] for r in rows]})
    ax.set_title("clean vs robust accuracy")
    _save(fig, path)


def plot_figure1(rows: dict, path) -> None:
    """Train accuracy on each model's own data next to clean test accuracy."""
    names = list(rows)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    _bars(ax, names, {"train (own data)": [rows[n]["train_acc"] for n in names],
                      "test (clean)": [rows[n]["test_acc"] for n in names]})
    ax.set_title("adversarial-only vs friendly-only training")
    _save(fig, path)


def plot_sweep(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r["setting"] for r in rows]
    ax.plot(xs, [100 * r["clean"] for r in rows], "o-", label="clean")
    ax.plot(xs, [100 * r["ra"] for r in rows], "s-", label="robust")
    ax.set_xlabel(rows[0]["kind"] if rows else "setting")
    ax.set_ylabel("%")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_training(report, path) -> None:
    """Loss (and its components) plus train/dev accuracy per epoch."""
    epochs = np.arange(1, len(report.loss) + 1)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.2))
    a1.plot(epochs, report.loss, "k-", label="total")
    for key in ("clean", "adv", "friendly"):
        vals = [c[key] for c in report.components]
        if any(vals):
            a1.plot(epochs, vals, "--", label=key)
    a1.set_xlabel("epoch")
    a1.set_ylabel("loss")
    a1.legend(frameon=False)
    a2.plot(epochs, report.train_acc, "o-", label="train")
    if all(v is not None for v in report.dev_acc):
        a2.plot(epochs, report.dev_acc, "s-", label="dev")
    a2.set_xlabel("epoch")
    a2.set_ylabel("accuracy")
    a2.legend(frameon=False)
    _save(fig, path)
