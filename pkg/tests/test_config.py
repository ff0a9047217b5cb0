import pytest

from ganaug.config import (
    GeneratorLossMode,
    TrainConfig,
    build_config,
    config_fingerprint,
    load_config_file,
    parse_overrides,
    render_config,
    training_mismatches,
    training_settings,
)
from ganaug.errors import ConfigError


class TestTrainConfig:
    def test_default_values(self):
        config = TrainConfig()
        assert config.epochs == 500
        assert config.batch_size == 64
        assert config.lr == 2e-4
        assert config.beta1 == 0.5
        assert config.beta2 == 0.999
        assert config.z_dim == 100
        assert config.img_size == 128
        assert config.base_channels == 64
        assert config.leaky_relu_alpha == 0.2
        assert config.batch_norm is False
        assert config.generator_loss_mode is GeneratorLossMode.NON_SATURATING
        assert config.grid_size == 64
        assert config.fid_every == 0
        assert config.fid_embedder == "random_projection:32:42"
        assert config.record_wall_time is False

    def test_env_prefix(self, monkeypatch):
        monkeypatch.setenv("GANAUG_EPOCHS", "3")
        monkeypatch.setenv("GANAUG_GENERATOR_LOSS_MODE", "minimax")
        config = TrainConfig()
        assert config.epochs == 3
        assert config.generator_loss_mode is GeneratorLossMode.MINIMAX

    def test_kwargs_beat_env(self, monkeypatch):
        monkeypatch.setenv("GANAUG_SEED", "5")
        assert TrainConfig(seed=9).seed == 9

    def test_grid_size_must_be_square(self):
        with pytest.raises(ValueError, match="perfect square"):
            TrainConfig(grid_size=10)

    def test_img_size_checked_at_load(self):
        with pytest.raises(ValueError):
            TrainConfig(img_size=100)

    @pytest.mark.parametrize("field,value", [("lr", 0.0), ("beta1", 1.0), ("batch_size", 0),
                                             ("epochs", 0), ("seed", -1)])
    def test_out_of_range(self, field, value):
        with pytest.raises(ValueError):
            TrainConfig(**{field: value})


class TestConfigFile:
    def test_load_flat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# tiny run\nepochs = 4\nimg_size = 32\nbatch_norm = true\n")
        config = build_config(path)
        assert (config.epochs, config.img_size, config.batch_norm) == (4, 32, True)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 4\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigError, match="learning_rate"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "nope.cfg")

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 4\nseed = 1\n")
        config = build_config(path, {"epochs": "6", "seed": None})
        assert config.epochs == 6
        assert config.seed == 1

    def test_invalid_value_wrapped(self):
        with pytest.raises(ConfigError, match="Invalid configuration"):
            build_config(overrides={"batch_size": "many"})

    def test_render_round_trip(self, tmp_path):
        original = TrainConfig(epochs=7, img_size=32, generator_loss_mode="minimax",
                               drop_last=True, output_dir=str(tmp_path / "out"))
        path = tmp_path / "config.txt"
        path.write_text(render_config(original))
        assert build_config(path) == original


class TestOverrides:
    def test_parse(self):
        assert parse_overrides(["epochs=3", " lr = 0.001 "]) == {"epochs": "3", "lr": "0.001"}

    @pytest.mark.parametrize("pair", ["epochs", "=3", "nonsense=1"])
    def test_rejects(self, pair):
        with pytest.raises(ConfigError):
            parse_overrides([pair])


class TestFingerprint:
    def test_stable_and_short(self):
        a = config_fingerprint(TrainConfig())
        assert a == config_fingerprint(TrainConfig())
        assert len(a) == 16

    def test_ignores_schedule(self):
        assert config_fingerprint(TrainConfig(epochs=3, lr=0.1)) == config_fingerprint(TrainConfig())

    def test_tracks_architecture(self):
        assert config_fingerprint(TrainConfig(img_size=32)) != config_fingerprint(TrainConfig())


class TestTrainingSettings:
    def test_recorded_as_text(self):
        settings = training_settings(TrainConfig(seed=3, drop_last=True))
        assert settings["seed"] == "3"
        assert settings["drop_last"] == "true"
        assert settings["generator_loss_mode"] == "non_saturating"
        assert "epochs" not in settings
        assert "img_size" not in settings

    def test_no_mismatch_for_same_config(self):
        config = TrainConfig(seed=3)
        assert training_mismatches(training_settings(config), config) == {}

    def test_reports_changed_fields(self):
        recorded = training_settings(TrainConfig(seed=3, batch_size=32))
        changed = training_mismatches(recorded, TrainConfig(seed=4, batch_size=32, epochs=9))
        assert changed == {"seed": ("3", "4")}

    def test_unrecorded_fields_ignored(self):
        assert training_mismatches({}, TrainConfig(seed=4)) == {}
        assert training_mismatches({"seed": "4"}, TrainConfig(seed=4, lr=0.1)) == {}
