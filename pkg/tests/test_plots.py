import pytest
from PIL import Image

from ganaug.core.plots import DPI, FIGSIZE, load_metrics, plot_training_curves
from ganaug.core.trainer import train
from ganaug.errors import DataError
from ganaug.models.schemas import EpochMetrics
from tests.conftest import make_config


class TestLoadMetrics:
    def test_reads_run_csv(self, tmp_path, tiny_dataset):
        result = train(make_config(tmp_path, sample_grid_every=0), tiny_dataset)
        assert load_metrics(tmp_path / "run") == result.metrics

    def test_missing_run(self, tmp_path):
        with pytest.raises(DataError, match="No metrics"):
            load_metrics(tmp_path)

    def test_header_only(self, tmp_path):
        (tmp_path / "metrics.csv").write_text("epoch,d_loss,g_loss,d_accuracy,wall_time_s\n")
        with pytest.raises(DataError, match="no completed epochs"):
            load_metrics(tmp_path)


class TestPlotTrainingCurves:
    def test_writes_png_of_figure_size(self, tmp_path):
        metrics = [
            EpochMetrics(epoch=e, d_loss=1.4 - 0.1 * e, g_loss=0.7 + 0.05 * e,
                         d_accuracy=0.5 + 0.04 * e)
            for e in range(1, 6)
        ]
        path = plot_training_curves(metrics, tmp_path / "plots" / "curves.png")
        with Image.open(path) as img:
            assert img.format == "PNG"
            assert img.size == (FIGSIZE[0] * DPI, FIGSIZE[1] * DPI)

    def test_single_epoch(self, tmp_path):
        metrics = [EpochMetrics(epoch=1, d_loss=1.3, g_loss=0.7, d_accuracy=0.5)]
        assert (tmp_path / "one.png").samefile(plot_training_curves(metrics, tmp_path / "one.png"))

    def test_empty(self, tmp_path):
        with pytest.raises(DataError):
            plot_training_curves([], tmp_path / "none.png")
