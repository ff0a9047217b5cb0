import enum
import hashlib
import logging
import math
from pathlib import Path

from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from ganaug.errors import ConfigError
from ganaug.models.specs import DiscriminatorSpec, GeneratorSpec

logger = logging.getLogger(__name__)

# Fields that define network topology; checkpoints must agree on these.
ARCHITECTURE_FIELDS = ("z_dim", "img_size", "base_channels", "channels", "leaky_relu_alpha")
# Settings that must match for a resumed run to equal an uninterrupted one.
TRAINING_FIELDS = (
    "seed", "batch_size", "d_steps_per_g_step", "drop_last", "generator_loss_mode",
    "lr", "beta1", "beta2", "eps",
)


class GeneratorLossMode(str, enum.Enum):
    MINIMAX = "minimax"
    NON_SATURATING = "non_saturating"


class TrainConfig(BaseSettings):
    """Hyperparameters, seeds, paths and schedule for one training run.

    Sources, highest precedence first: explicit keyword arguments (CLI flags
    merged over the config file), GANAUG_* environment variables, .env, defaults.
    """

    # Schedule
    epochs: int = Field(default=500, ge=1)
    batch_size: int = Field(default=64, ge=1)
    d_steps_per_g_step: int = Field(default=1, ge=1)
    drop_last: bool = False

    # Adam
    lr: float = Field(default=2e-4, gt=0.0)
    beta1: float = Field(default=0.5, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)

    # Architecture
    z_dim: int = Field(default=100, ge=1)
    img_size: int = 128
    base_channels: int = Field(default=64, ge=2)
    channels: int = Field(default=1, ge=1)
    leaky_relu_alpha: float = Field(default=0.2, ge=0.0, lt=1.0)
    batch_norm: bool = False

    # Objective
    generator_loss_mode: GeneratorLossMode = GeneratorLossMode.NON_SATURATING

    # Reproducibility
    seed: int = Field(default=0, ge=0)
    record_wall_time: bool = False

    # Paths
    data_path: str = ""
    output_dir: str = "runs/default"
    resume_from: str = ""

    # Outputs
    checkpoint_every: int = Field(default=50, ge=0)
    sample_grid_every: int = Field(default=10, ge=0)
    grid_size: int = Field(default=64, ge=1)

    # FID tracking
    fid_every: int = Field(default=0, ge=0)
    fid_embedder: str = "random_projection:32:42"
    fid_samples: int = Field(default=0, ge=0)

    model_config = {
        "env_prefix": "GANAUG_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }

    @field_validator("grid_size")
    @classmethod
    def _grid_square(cls, value: int) -> int:
        if math.isqrt(value) ** 2 != value:
            raise ValueError(f"grid_size must be a perfect square, got {value}")
        return value

    @model_validator(mode="after")
    def _check_architecture(self) -> "TrainConfig":
        # Surface topology errors at config time rather than at the first forward pass.
        self.generator_spec()
        self.discriminator_spec()
        return self

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(
            z_dim=self.z_dim,
            img_size=self.img_size,
            base_channels=self.base_channels,
            out_channels=self.channels,
            leaky_relu_alpha=self.leaky_relu_alpha,
            batch_norm=self.batch_norm,
        )

    def discriminator_spec(self) -> DiscriminatorSpec:
        return DiscriminatorSpec(
            img_size=self.img_size,
            base_channels=self.base_channels,
            in_channels=self.channels,
            leaky_relu_alpha=self.leaky_relu_alpha,
            batch_norm=self.batch_norm,
        )


def config_fingerprint(config: TrainConfig) -> str:
    payload = "|".join(f"{name}={getattr(config, name)!r}" for name in ARCHITECTURE_FIELDS)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse flat ``key = value`` lines; unknown keys are rejected."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"Config file not found: {p}")
    values = {k: v for k, v in dotenv_values(p, encoding="utf-8").items() if v is not None}
    unknown = sorted(set(values) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown config keys in {p}: {', '.join(unknown)}")
    return values


def parse_overrides(pairs: list[str] | tuple[str, ...]) -> dict[str, str]:
    """['key=value', ...] -> dict, rejecting malformed pairs and unknown keys."""
    overrides: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"Override must look like key=value, got '{pair}'")
        if key not in TrainConfig.model_fields:
            raise ConfigError(f"Unknown config key '{key}'")
        overrides[key] = value.strip()
    return overrides


def build_config(
    config_path: str | Path | None = None,
    overrides: dict[str, object] | None = None,
) -> TrainConfig:
    """Config file values, then overrides on top, validated as a TrainConfig."""
    values: dict[str, object] = {}
    if config_path:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def render_config(config: TrainConfig) -> str:
    """Effective config as ``key = value`` lines; build_config reads it back unchanged."""
    lines = [f"{name} = {_text(getattr(config, name))}" for name in TrainConfig.model_fields]
    return "\n".join(lines) + "\n"


def _text(value: object) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def training_settings(config: TrainConfig) -> dict[str, str]:
    return {name: _text(getattr(config, name)) for name in TRAINING_FIELDS}


def training_mismatches(recorded: dict[str, str], config: TrainConfig) -> dict[str, tuple[str, str]]:
    """{field: (recorded, current)} for every recorded training setting that changed."""
    current = training_settings(config)
    return {
        name: (recorded[name], current[name])
        for name in TRAINING_FIELDS
        if name in recorded and recorded[name] != current[name]
    }
