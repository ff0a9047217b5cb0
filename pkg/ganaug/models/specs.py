"""Topology specifications for the generator and the discriminator."""

import hashlib

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ganaug.core.ops import DEFAULT_LEAKY_ALPHA

# Both networks change resolution by 2x four times.
NUM_STAGES = 4
SCALE = 2 ** NUM_STAGES


def _check_img_size(value: int) -> int:
    if value < SCALE or value % SCALE:
        raise ValueError(f"img_size must be a positive multiple of {SCALE}, got {value}")
    return value


class _NetworkSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    base_channels: int = Field(default=64, ge=2)
    img_size: int = 128
    leaky_relu_alpha: float = Field(default=DEFAULT_LEAKY_ALPHA, ge=0.0, lt=1.0)
    batch_norm: bool = False

    @field_validator("img_size")
    @classmethod
    def _img_size_divisible(cls, value: int) -> int:
        return _check_img_size(value)

    @model_validator(mode="after")
    def _reject_batch_norm(self):
        if self.batch_norm:
            raise ValueError("batch_norm is reserved but not implemented")
        return self

    @property
    def initial_size(self) -> int:
        """Side of the smallest feature map (img_size / 16)."""
        return self.img_size // SCALE

    def fingerprint(self) -> str:
        payload = f"{type(self).__name__}|{self.model_dump_json()}"
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


class GeneratorSpec(_NetworkSpec):
    """z -> dense projection -> 4 x [upsample, conv3x3, leaky_relu] -> conv3x3 -> tanh."""

    z_dim: int = Field(default=100, ge=1)
    out_channels: int = Field(default=1, ge=1)

    @field_validator("base_channels")
    @classmethod
    def _even_base(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"generator base_channels must be even, got {value}")
        return value

    @property
    def widths(self) -> list[int]:
        """Channel count entering each block, then the last block's output."""
        b = self.base_channels
        return [8 * b, 4 * b, 2 * b, b, b // 2]

    @property
    def projection_size(self) -> int:
        return self.widths[0] * self.initial_size ** 2

    def parameter_count(self) -> int:
        w = self.widths
        total = self.z_dim * self.projection_size + self.projection_size
        for c_in, c_out in zip(w[:-1], w[1:]):
            total += c_out * c_in * 9 + c_out
        total += self.out_channels * w[-1] * 9 + self.out_channels
        return total


class DiscriminatorSpec(_NetworkSpec):
    """4 x [conv4x4 stride 2, leaky_relu] -> flatten -> dense -> sigmoid."""

    in_channels: int = Field(default=1, ge=1)

    @property
    def widths(self) -> list[int]:
        b = self.base_channels
        return [self.in_channels, b, 2 * b, 4 * b, 8 * b]

    @property
    def feature_dim(self) -> int:
        """Length of the flattened penultimate activation."""
        return self.widths[-1] * self.initial_size ** 2

    def parameter_count(self) -> int:
        w = self.widths
        total = 0
        for c_in, c_out in zip(w[:-1], w[1:]):
            total += c_out * c_in * 16 + c_out
        return total + self.feature_dim + 1
