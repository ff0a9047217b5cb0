"""Ordered, named parameter tensors for one network."""

import logging
from dataclasses import dataclass

import numpy as np

from ganaug.core.ops import Tensor
from ganaug.errors import DimensionError
from ganaug.models.specs import DiscriminatorSpec, GeneratorSpec

logger = logging.getLogger(__name__)

INIT_STD = 0.02

NetworkSpec = GeneratorSpec | DiscriminatorSpec


@dataclass(frozen=True)
class NetworkParams:
    """Parameters in a fixed documented order; checkpoints serialize in this order.

    Generator order: fc.weight, fc.bias, block{1..4}.conv.weight/bias, out.conv.weight/bias.
    Discriminator order: block{1..4}.conv.weight/bias, head.weight, head.bias.
    """
    spec: NetworkSpec
    tensors: dict[str, Tensor]

    def __post_init__(self):
        expected = parameter_shapes(self.spec)
        if list(self.tensors) != list(expected):
            raise DimensionError(
                f"parameter names {list(self.tensors)} do not match topology {list(expected)}"
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise DimensionError(
                    f"{name} has shape {self.tensors[name].shape}, topology expects {shape}"
                )

    @property
    def fingerprint(self) -> str:
        return self.spec.fingerprint()

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def replace(self, tensors: dict[str, Tensor]) -> "NetworkParams":
        """Same spec, new tensors (reordered to the canonical order)."""
        return NetworkParams(self.spec, {name: tensors[name] for name in self.tensors})

    def items(self):
        return self.tensors.items()

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


def parameter_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    w = spec.widths
    if isinstance(spec, GeneratorSpec):
        shapes["fc.weight"] = (spec.z_dim, spec.projection_size)
        shapes["fc.bias"] = (spec.projection_size,)
        for i, (c_in, c_out) in enumerate(zip(w[:-1], w[1:]), start=1):
            shapes[f"block{i}.conv.weight"] = (c_out, c_in, 3, 3)
            shapes[f"block{i}.conv.bias"] = (c_out,)
        shapes["out.conv.weight"] = (spec.out_channels, w[-1], 3, 3)
        shapes["out.conv.bias"] = (spec.out_channels,)
    else:
        for i, (c_in, c_out) in enumerate(zip(w[:-1], w[1:]), start=1):
            shapes[f"block{i}.conv.weight"] = (c_out, c_in, 4, 4)
            shapes[f"block{i}.conv.bias"] = (c_out,)
        shapes["head.weight"] = (spec.feature_dim, 1)
        shapes["head.bias"] = (1,)
    return shapes


def init_weights(params: NetworkParams, seed: int) -> NetworkParams:
    """Weights ~ Normal(0, 0.02^2), biases exactly 0, drawn in canonical order."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, t in params.items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(t.shape)
        else:
            tensors[name] = rng.normal(0.0, INIT_STD, size=t.shape)
    return params.replace(tensors)


def zeros(spec: NetworkSpec) -> NetworkParams:
    return NetworkParams(spec, {name: np.zeros(shape) for name, shape in parameter_shapes(spec).items()})
