"""Discriminator network: image -> probability that it came from the data."""

import logging
from dataclasses import dataclass, field

from ganaug.core import ops
from ganaug.core.ops import Activation, Tensor
from ganaug.errors import DimensionError
from ganaug.models.params import NetworkParams, init_weights, zeros
from ganaug.models.specs import NUM_STAGES, DiscriminatorSpec

logger = logging.getLogger(__name__)


@dataclass
class DiscriminatorCache:
    inputs: list[Tensor] = field(default_factory=list)
    pre_act: list[Tensor] = field(default_factory=list)
    features: Tensor | None = None
    map_shape: tuple[int, ...] = ()


def build_discriminator(spec: DiscriminatorSpec, seed: int) -> NetworkParams:
    params = init_weights(zeros(spec), seed)
    logger.debug(
        "Built discriminator %s: %d parameters (img_size=%d, base=%d)",
        spec.fingerprint(), params.count(), spec.img_size, spec.base_channels,
    )
    return params


def _spec(params: NetworkParams) -> DiscriminatorSpec:
    if not isinstance(params.spec, DiscriminatorSpec):
        raise DimensionError("expected discriminator parameters")
    return params.spec


def _check_images(spec: DiscriminatorSpec, images: Tensor) -> None:
    expected = (spec.in_channels, spec.img_size, spec.img_size)
    if images.ndim != 4 or images.shape[1:] != expected:
        raise DimensionError(f"discriminator expects [N, {', '.join(map(str, expected))}], "
                             f"got {images.shape}")


def discriminator_logits_cached(
    params: NetworkParams, images: Tensor
) -> tuple[Tensor, DiscriminatorCache]:
    """Pre-sigmoid scores [N, 1] plus the cache for backprop."""
    spec = _spec(params)
    _check_images(spec, images)
    cache = DiscriminatorCache()

    h = images
    for i in range(1, NUM_STAGES + 1):
        c = ops.conv2d(h, params[f"block{i}.conv.weight"], params[f"block{i}.conv.bias"], 2, 1)
        cache.inputs.append(h)
        cache.pre_act.append(c)
        h = ops.activation(Activation.LEAKY_RELU, c, spec.leaky_relu_alpha)

    cache.map_shape = h.shape
    features = h.reshape(h.shape[0], -1)
    cache.features = features
    logits = ops.dense(features, params["head.weight"], params["head.bias"])
    return logits, cache


def discriminator_forward(params: NetworkParams, images: Tensor) -> Tensor:
    """D(x): [N, C, s, s] -> probabilities [N, 1] in (0, 1)."""
    logits, _ = discriminator_logits_cached(params, images)
    return ops.activation(Activation.SIGMOID, logits)


def discriminator_features(params: NetworkParams, images: Tensor) -> Tensor:
    """Flattened penultimate activations, [N, base_channels * 8 * (s/16)^2]."""
    _, cache = discriminator_logits_cached(params, images)
    return cache.features


def discriminator_backward(
    params: NetworkParams, cache: DiscriminatorCache, grad_logits: Tensor
) -> tuple[dict[str, Tensor], Tensor]:
    """Returns (parameter gradients in canonical order, gradient w.r.t. the images)."""
    spec = _spec(params)
    grads: dict[str, Tensor] = {}

    g, grads["head.weight"], grads["head.bias"] = ops.dense_backward(
        grad_logits, cache.features, params["head.weight"]
    )
    g = g.reshape(cache.map_shape)
    for i in range(NUM_STAGES, 0, -1):
        g = ops.activation_backward(
            Activation.LEAKY_RELU, cache.pre_act[i - 1], g, spec.leaky_relu_alpha
        )
        g, grads[f"block{i}.conv.weight"], grads[f"block{i}.conv.bias"] = ops.conv2d_backward(
            g, cache.inputs[i - 1], params[f"block{i}.conv.weight"], 2, 1
        )
    return {name: grads[name] for name in params.names}, g
