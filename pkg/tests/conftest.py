from pathlib import Path

import numpy as np
import pytest

from ganaug.config import TrainConfig
from ganaug.core.data import ImageDataset
from ganaug.models.specs import DiscriminatorSpec, GeneratorSpec

# Desk-scale topology shared by the network, training and checkpoint tests.
TINY = {"z_dim": 8, "img_size": 16, "base_channels": 4}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gen_spec() -> GeneratorSpec:
    return GeneratorSpec(**TINY)


@pytest.fixture
def disc_spec() -> DiscriminatorSpec:
    return DiscriminatorSpec(img_size=TINY["img_size"], base_channels=TINY["base_channels"])


def make_config(tmp_path: Path, **overrides) -> TrainConfig:
    """Two-epoch tiny run with byte-reproducible outputs."""
    values = {
        **TINY,
        "epochs": 2,
        "batch_size": 8,
        "seed": 7,
        "record_wall_time": False,
        "output_dir": str(tmp_path / "run"),
        "checkpoint_every": 1,
        "sample_grid_every": 1,
        "grid_size": 4,
    }
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def tiny_dataset() -> ImageDataset:
    """20 synthetic 16x16 blob images."""
    from ganaug.core.synth import synth_blob_dataset

    return synth_blob_dataset(20, 16, seed=3)


@pytest.fixture
def image_dir(tmp_path, tiny_dataset) -> Path:
    """tiny_dataset written out as PNGs."""
    from ganaug.core.synth import write_dataset

    out = tmp_path / "images"
    write_dataset(tiny_dataset, out)
    return out


def make_checkpoint(gen_spec: GeneratorSpec, disc_spec: DiscriminatorSpec, epoch: int = 3):
    from ganaug.core.checkpoint import Checkpoint, encode_rng_state
    from ganaug.core.optim import AdamState
    from ganaug.models.discriminator import build_discriminator
    from ganaug.models.generator import build_generator

    generator = build_generator(gen_spec, 1)
    discriminator = build_discriminator(disc_spec, 2)
    rng = np.random.default_rng(99)
    g_adam = AdamState(
        m={n: rng.standard_normal(t.shape) for n, t in generator.items()},
        v={n: rng.uniform(0, 1, t.shape) for n, t in generator.items()},
        t=12,
    )
    return Checkpoint(
        epoch=epoch,
        generator=generator,
        discriminator=discriminator,
        generator_adam=g_adam,
        discriminator_adam=AdamState.zeros_like(discriminator.tensors),
        rng_state=encode_rng_state(rng),
        config_fingerprint="0123456789abcdef",
    )


@pytest.fixture
def checkpoint_file(tmp_path, gen_spec, disc_spec) -> Path:
    from ganaug.core.checkpoint import save_checkpoint

    path = tmp_path / "ckpt_3.gfc"
    save_checkpoint(make_checkpoint(gen_spec, disc_spec), path)
    return path
