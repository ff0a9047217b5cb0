import json

import pytest
from click.testing import CliRunner
from PIL import Image

from ganaug.cli import cli


@pytest.fixture
def runner():
    return CliRunner()


def _synth(runner, out, n=40, seed=0, extra=()):
    result = runner.invoke(cli, ["synth-data", "--n", str(n), "--size", "16", "--seed", str(seed),
                                 "--out", str(out), *extra])
    assert result.exit_code == 0, result.output
    return out


class TestSynthData:
    def test_identical_directories(self, runner, tmp_path):
        a = _synth(runner, tmp_path / "a", n=5)
        b = _synth(runner, tmp_path / "b", n=5)
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_anomalous_class(self, runner, tmp_path):
        out = _synth(runner, tmp_path / "anom", n=2, extra=("--class", "anomalous"))
        assert sorted(p.name for p in out.iterdir()) == ["anomalous_00000.png",
                                                         "anomalous_00001.png"]


class TestFid:
    def test_identical_directories_score_zero(self, runner, tmp_path):
        real = _synth(runner, tmp_path / "real")
        result = runner.invoke(cli, ["fid", "--real", str(real), "--fake", str(real)])
        assert result.exit_code == 0, result.output
        assert result.output.startswith("FID=0.000000 n_real=40 n_fake=40 d=32")

    def test_line_and_json_report(self, runner, tmp_path):
        real = _synth(runner, tmp_path / "real")
        fake = _synth(runner, tmp_path / "fake", seed=1)
        report = tmp_path / "out" / "fid.json"
        result = runner.invoke(cli, ["fid", "--real", str(real), "--fake", str(fake),
                                     "--embedder", "random_projection:8:1",
                                     "--json-out", str(report)])
        assert result.exit_code == 0, result.output
        line = result.output.strip().splitlines()[-1]
        assert line.startswith("FID=") and line.endswith("d=8 embedder=random_projection:8:1")
        data = json.loads(report.read_text())
        assert data["d"] == 8 and data["score"] > 0.0
        assert data["embedder"] == "random_projection:8:1"
        assert line.startswith(f"FID={data['score']:.6f} n_real=40 n_fake=40")

    def test_too_few_images(self, runner, tmp_path):
        real = _synth(runner, tmp_path / "real", n=10)
        result = runner.invoke(cli, ["fid", "--real", str(real), "--fake", str(real)])
        assert result.exit_code == 1
        assert "need n > d" in result.output

    def test_needs_exactly_one_fake_source(self, runner, tmp_path):
        real = _synth(runner, tmp_path / "real", n=2)
        result = runner.invoke(cli, ["fid", "--real", str(real)])
        assert result.exit_code == 1

    def test_from_checkpoint(self, runner, tmp_path, checkpoint_file):
        real = _synth(runner, tmp_path / "real", n=12)
        result = runner.invoke(cli, ["fid", "--real", str(real), "--checkpoint",
                                     str(checkpoint_file), "--embedder", "random_projection:4:0"])
        assert result.exit_code == 0, result.output
        assert "n_real=12 n_fake=12 d=4" in result.output


class TestUsage:
    def test_unknown_subcommand(self, runner):
        assert runner.invoke(cli, ["explode"]).exit_code == 1

    def test_unknown_flag(self, runner):
        assert runner.invoke(cli, ["gradcheck", "--frobnicate"]).exit_code == 1

    def test_unknown_set_key(self, runner, tmp_path):
        result = runner.invoke(cli, ["train", "--set", "learning_rate=1", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "learning_rate" in result.output

    def test_report_missing(self, runner, tmp_path):
        result = runner.invoke(cli, ["report", "--run", str(tmp_path)])
        assert result.exit_code == 1
        assert "No report" in result.output


class TestGradcheck:
    def test_all_pass(self, runner):
        result = runner.invoke(cli, ["gradcheck"])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output
        assert "FAIL" not in result.output


class TestTrainGenerateReport:
    def test_end_to_end(self, runner, tmp_path):
        data = _synth(runner, tmp_path / "data", n=12)
        out = tmp_path / "run"
        result = runner.invoke(cli, [
            "train", "--data", str(data), "--out", str(out), "--epochs", "1", "--seed", "3",
            "--set", "img_size=16", "--set", "z_dim=8", "--set", "base_channels=4",
            "--set", "batch_size=6", "--set", "grid_size=4",
        ])
        assert result.exit_code == 0, result.output
        assert "Trained to epoch 1" in result.output
        assert (out / "ckpt_1.gfc").is_file()
        assert "seed = 3" in (out / "config.txt").read_text()

        grid = tmp_path / "grid.png"
        samples = tmp_path / "samples"
        result = runner.invoke(cli, ["generate", "--checkpoint", str(out / "ckpt_1.gfc"),
                                     "--n", "4", "--out", str(grid), "--real", str(data),
                                     "--images-dir", str(samples)])
        assert result.exit_code == 0, result.output
        assert grid.is_file()
        assert len(list(samples.glob("gen_*.png"))) == 4

        result = runner.invoke(cli, ["report", "--run", str(out)])
        assert result.exit_code == 0, result.output
        assert result.output.startswith(f"[OK] {out}: 1 epoch(s)")

        curves = tmp_path / "curves.png"
        result = runner.invoke(cli, ["report", "--run", str(out), "--plot", str(curves)])
        assert result.exit_code == 0, result.output
        assert f"[OK] curves -> {curves}" in result.output
        with Image.open(curves) as img:
            assert img.format == "PNG"

    def test_config_file_with_flag_override(self, runner, tmp_path):
        data = _synth(runner, tmp_path / "data", n=6)
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text("img_size = 16\nz_dim = 4\nbase_channels = 2\nbatch_size = 6\n"
                       "grid_size = 1\nepochs = 5\n")
        result = runner.invoke(cli, ["train", "--config", str(cfg), "--set", "epochs=3",
                                     "--epochs", "1", "--data", str(data),
                                     "--out", str(tmp_path / "run")])
        assert result.exit_code == 0, result.output
        assert "epochs = 1" in (tmp_path / "run" / "config.txt").read_text()

    def test_default_config_is_byte_reproducible(self, runner, tmp_path, monkeypatch):
        monkeypatch.delenv("GANAUG_RECORD_WALL_TIME", raising=False)
        data = _synth(runner, tmp_path / "data", n=12)
        out = tmp_path / "run"
        args = ["train", "--data", str(data), "--out", str(out), "--epochs", "2", "--seed", "7",
                "--set", "img_size=16", "--set", "z_dim=8", "--set", "base_channels=4",
                "--set", "batch_size=6", "--set", "grid_size=4"]
        names = ("metrics.csv", "report.json", "config.txt", "ckpt_2.gfc", "samples_2.png")

        assert runner.invoke(cli, args).exit_code == 0
        first = {name: (out / name).read_bytes() for name in names}
        assert runner.invoke(cli, args).exit_code == 0
        for name in names:
            assert (out / name).read_bytes() == first[name], name

    def test_generate_needs_output(self, runner, checkpoint_file):
        result = runner.invoke(cli, ["generate", "--checkpoint", str(checkpoint_file)])
        assert result.exit_code == 1
