"""Central finite-difference verification of analytic gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ganaug.core import ops
from ganaug.core.ops import Activation, Tensor
from ganaug.errors import ConfigError
from ganaug.models.discriminator import (
    build_discriminator,
    discriminator_backward,
    discriminator_logits_cached,
)
from ganaug.models.generator import build_generator, generator_backward, generator_forward_cached
from ganaug.models.specs import DiscriminatorSpec, GeneratorSpec

logger = logging.getLogger(__name__)

FD_STEP = 1e-5

# fn(tensors) -> (scalar loss, analytic gradient per tensor name)
LossAndGrad = Callable[[dict[str, Tensor]], tuple[float, dict[str, Tensor]]]


@dataclass
class GradcheckEntry:
    name: str
    max_rel_error: float
    checked: int
    passed: bool


@dataclass
class GradcheckReport:
    case: str
    tolerance: float
    entries: list[GradcheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> GradcheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def relative_error(analytic: Tensor, numeric: Tensor) -> float:
    """max|a - n| / max(max|a|, max|n|); 0 when both are identically zero."""
    scale = max(float(np.max(np.abs(analytic), initial=0.0)),
                float(np.max(np.abs(numeric), initial=0.0)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric))) / scale


def gradcheck(
    fn: LossAndGrad,
    tensors: dict[str, Tensor],
    tolerance: float = 1e-4,
    h: float = FD_STEP,
    max_entries: int | None = None,
    seed: int = 0,
    case: str = "",
) -> GradcheckReport:
    """Compare ``fn``'s analytic gradients against central differences.

    When ``max_entries`` is set, larger tensors are probed at that many
    seeded random positions instead of every entry. Failures are report
    entries, never exceptions.
    """
    if tolerance <= 0:
        raise ConfigError(f"tolerance must be > 0, got {tolerance}")
    tensors = {name: ops.as_tensor(t, name) for name, t in tensors.items()}
    _, analytic = fn(tensors)
    rng = np.random.default_rng(seed)
    report = GradcheckReport(case=case, tolerance=tolerance)

    for name, base in tensors.items():
        if max_entries is None or base.size <= max_entries:
            positions = np.arange(base.size)
        else:
            positions = np.sort(rng.choice(base.size, size=max_entries, replace=False))

        numeric = np.empty(len(positions))
        for j, flat in enumerate(positions):
            probe = base.copy()
            view = probe.reshape(-1)
            view[flat] = base.flat[flat] + h
            f_plus, _ = fn({**tensors, name: probe})
            view[flat] = base.flat[flat] - h
            f_minus, _ = fn({**tensors, name: probe})
            numeric[j] = (f_plus - f_minus) / (2.0 * h)

        err = relative_error(analytic[name].reshape(-1)[positions], numeric)
        report.entries.append(GradcheckEntry(name, err, len(positions), err < tolerance))
        logger.debug("gradcheck %s/%s: rel_err=%.3e over %d entries", case, name, err,
                     len(positions))

    return report


# ── Built-in cases ────────────────────────────────────────────────


def _projection_loss(out: Tensor, weights: Tensor) -> float:
    return float(np.sum(out * weights))


def conv2d_case(rng: np.random.Generator, stride: int = 2, pad: int = 1):
    x = rng.standard_normal((1, 2, 5, 5))
    kernel = rng.standard_normal((3, 2, 3, 3))
    bias = rng.standard_normal(3)
    out_size = ops.conv2d_output_size(5, 3, stride, pad)
    weights = rng.standard_normal((1, 3, out_size, out_size))

    def fn(t):
        out = ops.conv2d(t["input"], t["kernel"], t["bias"], stride, pad)
        gx, gk, gb = ops.conv2d_backward(weights, t["input"], t["kernel"], stride, pad)
        return _projection_loss(out, weights), {"input": gx, "kernel": gk, "bias": gb}

    return fn, {"input": x, "kernel": kernel, "bias": bias}


def dense_case(rng: np.random.Generator):
    x = rng.standard_normal((4, 3))
    weight = rng.standard_normal((3, 2))
    bias = rng.standard_normal(2)
    weights = rng.standard_normal((4, 2))

    def fn(t):
        out = ops.dense(t["input"], t["weight"], t["bias"])
        gx, gw, gb = ops.dense_backward(weights, t["input"], t["weight"])
        return _projection_loss(out, weights), {"input": gx, "weight": gw, "bias": gb}

    return fn, {"input": x, "weight": weight, "bias": bias}


def upsample_case(rng: np.random.Generator):
    x = rng.standard_normal((2, 2, 3, 3))
    weights = rng.standard_normal((2, 2, 6, 6))

    def fn(t):
        out = ops.upsample_nearest_2x(t["input"])
        return _projection_loss(out, weights), {"input": ops.upsample_nearest_2x_backward(weights)}

    return fn, {"input": x}


def activation_case(rng: np.random.Generator, kind: Activation, alpha: float = 0.2):
    x = rng.standard_normal((3, 7))
    # Keep leaky_relu probes away from the kink at 0.
    x = np.where(np.abs(x) < 1e-2, 0.5, x)
    weights = rng.standard_normal((3, 7))

    def fn(t):
        out = ops.activation(kind, t["input"], alpha)
        grad = ops.activation_backward(kind, t["input"], weights, alpha)
        return _projection_loss(out, weights), {"input": grad}

    return fn, {"input": x}


def bce_case(rng: np.random.Generator, n: int = 16):
    pred = rng.uniform(0.05, 0.95, size=n)
    target = rng.integers(0, 2, size=n).astype(np.float64)

    def fn(t):
        return ops.bce_loss(t["pred"], target), {"pred": ops.bce_loss_backward(t["pred"], target)}

    return fn, {"pred": pred}


def bce_logits_case(rng: np.random.Generator, n: int = 16):
    logits = rng.standard_normal(n) * 3.0
    target = rng.integers(0, 2, size=n).astype(np.float64)

    def fn(t):
        return (ops.bce_with_logits(t["logits"], target),
                {"logits": ops.bce_with_logits_backward(t["logits"], target)})

    return fn, {"logits": logits}


def _unit_scale(params, rng: np.random.Generator):
    """Fan-in scaled weights and small nonzero biases, so no layer's gradient vanishes."""
    tensors = {}
    for name, t in params.items():
        if name.endswith(".bias"):
            tensors[name] = rng.normal(0.0, 0.1, size=t.shape)
        else:
            fan_in = t.shape[0] if t.ndim == 2 else int(np.prod(t.shape[1:]))
            tensors[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=t.shape)
    return params.replace(tensors)


def generator_case(
    rng: np.random.Generator, img_size: int = 16, base_channels: int = 4, batch: int = 2,
    z_dim: int = 8,
):
    spec = GeneratorSpec(z_dim=z_dim, img_size=img_size, base_channels=base_channels)
    params = _unit_scale(build_generator(spec, int(rng.integers(2**31))), rng)
    z = rng.standard_normal((batch, z_dim))
    weights = rng.standard_normal((batch, spec.out_channels, img_size, img_size))

    def fn(t):
        p = params.replace({name: t[name] for name in params.names})
        out, cache = generator_forward_cached(p, t["z"])
        grads, grad_z = generator_backward(p, cache, weights)
        return _projection_loss(out, weights), {**grads, "z": grad_z}

    return fn, {**params.tensors, "z": z}


def discriminator_case(
    rng: np.random.Generator, img_size: int = 16, base_channels: int = 4, batch: int = 2
):
    spec = DiscriminatorSpec(img_size=img_size, base_channels=base_channels)
    params = _unit_scale(build_discriminator(spec, int(rng.integers(2**31))), rng)
    images = rng.uniform(-1.0, 1.0, size=(batch, spec.in_channels, img_size, img_size))
    target = (np.arange(batch) % 2).astype(np.float64).reshape(batch, 1)

    def fn(t):
        p = params.replace({name: t[name] for name in params.names})
        logits, cache = discriminator_logits_cached(p, t["images"])
        loss = ops.bce_with_logits(logits, target)
        grads, grad_images = discriminator_backward(
            p, cache, ops.bce_with_logits_backward(logits, target)
        )
        return loss, {**grads, "images": grad_images}

    return fn, {**params.tensors, "images": images}


def run_suite(
    tolerance: float = 1e-4,
    seed: int = 0,
    img_size: int = 16,
    base_channels: int = 4,
    max_entries: int = 24,
) -> list[GradcheckReport]:
    """Every operator plus both full networks (batch 2)."""
    rng = np.random.default_rng(seed)
    cases = [
        ("conv2d", conv2d_case(rng), None),
        ("conv2d_stride1", conv2d_case(rng, stride=1, pad=0), None),
        ("dense", dense_case(rng), None),
        ("upsample_nearest_2x", upsample_case(rng), None),
        ("leaky_relu", activation_case(rng, Activation.LEAKY_RELU), None),
        ("tanh", activation_case(rng, Activation.TANH), None),
        ("sigmoid", activation_case(rng, Activation.SIGMOID), None),
        ("bce_loss", bce_case(rng), None),
        ("bce_with_logits", bce_logits_case(rng), None),
        ("generator", generator_case(rng, img_size, base_channels), max_entries),
        ("discriminator", discriminator_case(rng, img_size, base_channels), max_entries),
    ]
    reports = []
    for case, (fn, tensors), limit in cases:
        report = gradcheck(fn, tensors, tolerance, max_entries=limit, seed=seed, case=case)
        logger.info("gradcheck %-20s %s", case, "PASS" if report.passed else "FAIL")
        reports.append(report)
    return reports
