"""Generator network: latent vector -> image in [-1, 1]."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ganaug.core import ops
from ganaug.core.ops import Activation, Tensor
from ganaug.errors import DimensionError
from ganaug.models.params import NetworkParams, init_weights, zeros
from ganaug.models.specs import NUM_STAGES, GeneratorSpec

logger = logging.getLogger(__name__)


@dataclass
class GeneratorCache:
    """Intermediate activations kept by the forward pass for backprop."""
    z: Tensor
    upsampled: list[Tensor] = field(default_factory=list)
    pre_act: list[Tensor] = field(default_factory=list)
    last_hidden: Tensor | None = None
    out_pre_act: Tensor | None = None


def build_generator(spec: GeneratorSpec, seed: int) -> NetworkParams:
    params = init_weights(zeros(spec), seed)
    logger.debug(
        "Built generator %s: %d parameters (img_size=%d, base=%d)",
        spec.fingerprint(), params.count(), spec.img_size, spec.base_channels,
    )
    return params


def sample_latents(rng: np.random.Generator, n: int, z_dim: int) -> Tensor:
    """i.i.d. standard normal latent batch of shape [n, z_dim]."""
    return rng.standard_normal((n, z_dim))


def _spec(params: NetworkParams) -> GeneratorSpec:
    if not isinstance(params.spec, GeneratorSpec):
        raise DimensionError("expected generator parameters")
    return params.spec


def generator_forward_cached(
    params: NetworkParams, z: Tensor
) -> tuple[Tensor, GeneratorCache]:
    spec = _spec(params)
    if z.ndim != 2 or z.shape[1] != spec.z_dim:
        raise DimensionError(f"latent batch must have shape [N, {spec.z_dim}], got {z.shape}")
    alpha = spec.leaky_relu_alpha
    cache = GeneratorCache(z=z)

    h = ops.dense(z, params["fc.weight"], params["fc.bias"])
    h = h.reshape(z.shape[0], spec.widths[0], spec.initial_size, spec.initial_size)
    for i in range(1, NUM_STAGES + 1):
        u = ops.upsample_nearest_2x(h)
        c = ops.conv2d(u, params[f"block{i}.conv.weight"], params[f"block{i}.conv.bias"], 1, 1)
        h = ops.activation(Activation.LEAKY_RELU, c, alpha)
        cache.upsampled.append(u)
        cache.pre_act.append(c)

    o = ops.conv2d(h, params["out.conv.weight"], params["out.conv.bias"], 1, 1)
    cache.last_hidden = h
    cache.out_pre_act = o
    return ops.activation(Activation.TANH, o), cache


def generator_forward(params: NetworkParams, z: Tensor) -> Tensor:
    """G(z): [N, z_dim] -> [N, out_channels, s, s], values in [-1, 1]."""
    images, _ = generator_forward_cached(params, z)
    return images


def generator_backward(
    params: NetworkParams, cache: GeneratorCache, grad_images: Tensor
) -> tuple[dict[str, Tensor], Tensor]:
    """Returns (parameter gradients in canonical order, gradient w.r.t. z)."""
    spec = _spec(params)
    alpha = spec.leaky_relu_alpha
    grads: dict[str, Tensor] = {}

    g = ops.activation_backward(Activation.TANH, cache.out_pre_act, grad_images)
    g, grads["out.conv.weight"], grads["out.conv.bias"] = ops.conv2d_backward(
        g, cache.last_hidden, params["out.conv.weight"], 1, 1
    )
    for i in range(NUM_STAGES, 0, -1):
        g = ops.activation_backward(Activation.LEAKY_RELU, cache.pre_act[i - 1], g, alpha)
        g, grads[f"block{i}.conv.weight"], grads[f"block{i}.conv.bias"] = ops.conv2d_backward(
            g, cache.upsampled[i - 1], params[f"block{i}.conv.weight"], 1, 1
        )
        g = ops.upsample_nearest_2x_backward(g)

    g = g.reshape(g.shape[0], -1)
    grad_z, grads["fc.weight"], grads["fc.bias"] = ops.dense_backward(
        g, cache.z, params["fc.weight"]
    )
    return {name: grads[name] for name in params.names}, grad_z
