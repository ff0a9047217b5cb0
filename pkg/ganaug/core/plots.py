"""Loss and accuracy curves from a run's metrics.csv."""

import csv
import logging
from pathlib import Path

from matplotlib.figure import Figure

from ganaug.core.trainer import METRICS_FILE
from ganaug.errors import DataError
from ganaug.models.schemas import EpochMetrics

logger = logging.getLogger(__name__)

FIGSIZE = (10, 7)  # inches
DPI = 100


def load_metrics(run_dir: str | Path) -> list[EpochMetrics]:
    path = Path(run_dir) / METRICS_FILE
    if not path.is_file():
        raise DataError(f"No metrics at {path}")
    with path.open(newline="", encoding="utf-8") as f:
        rows = [EpochMetrics(**row) for row in csv.DictReader(f)]
    if not rows:
        raise DataError(f"{path} has no completed epochs")
    return rows


def plot_training_curves(metrics: list[EpochMetrics], path: str | Path) -> str:
    """Two panels over epochs: D and G loss on top, discriminator accuracy below.

    Returns:
        Path to the written PNG (FIGSIZE * DPI pixels).
    """
    if not metrics:
        raise DataError("no epochs to plot")
    epochs = [m.epoch for m in metrics]

    fig = Figure(figsize=FIGSIZE, dpi=DPI)
    loss_ax, acc_ax = fig.subplots(2, 1, sharex=True)
    loss_ax.set_title("Generator and Discriminator Loss During Training")
    loss_ax.plot(epochs, [m.g_loss for m in metrics], label="G")
    loss_ax.plot(epochs, [m.d_loss for m in metrics], label="D")
    loss_ax.set_ylabel("Loss")
    loss_ax.legend()

    acc_ax.set_title("Discriminator Accuracy")
    acc_ax.plot(epochs, [m.d_accuracy for m in metrics], color="tab:green")
    acc_ax.axhline(0.5, color="gray", linestyle="--", linewidth=0.8)
    acc_ax.set_ylim(0.0, 1.0)
    acc_ax.set_xlabel("epoch")
    acc_ax.set_ylabel("Accuracy")
    fig.tight_layout()

    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="png")
    logger.info("Training curves written: %s (%d epochs)", out, len(metrics))
    return str(out)
