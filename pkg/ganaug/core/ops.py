"""Forward operators and their exact analytic gradients.

Every tensor is a float64 numpy array in row-major order. Operators are pure
functions: they never modify their inputs and raise NonFiniteError instead of
returning NaN or Inf.
"""

import enum
import logging

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ganaug.errors import ConfigError, DataError, DimensionError, NonFiniteError

logger = logging.getLogger(__name__)

Tensor = npt.NDArray[np.float64]

DEFAULT_LEAKY_ALPHA = 0.2

# Sigmoid outputs are kept strictly inside (0, 1).
_SIGMOID_LO = np.finfo(np.float64).tiny
_SIGMOID_HI = np.nextafter(1.0, 0.0)


class Activation(str, enum.Enum):
    LEAKY_RELU = "leaky_relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"


def as_tensor(data, name: str = "tensor") -> Tensor:
    """Contiguous float64 view or copy of ``data``, checked for NaN/Inf."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    return check_finite(arr, name)


def check_finite(arr: Tensor, name: str) -> Tensor:
    if not np.isfinite(arr).all():
        bad = int(arr.size - np.count_nonzero(np.isfinite(arr)))
        raise NonFiniteError(name, f"{bad} of {arr.size} entries")
    return arr


def _require_ndim(arr: Tensor, ndim: int, name: str) -> None:
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")


# ── Convolution ───────────────────────────────────────────────────


def conv2d_output_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _check_conv_args(x: Tensor, kernel: Tensor, stride: int, pad: int) -> None:
    _require_ndim(x, 4, "conv2d input")
    _require_ndim(kernel, 4, "conv2d kernel")
    if kernel.shape[2] != kernel.shape[3]:
        raise DimensionError(f"conv2d kernel must be square, got {kernel.shape[2:]}")
    if x.shape[1] != kernel.shape[1]:
        raise DimensionError(
            f"conv2d channel mismatch: input has {x.shape[1]}, kernel expects {kernel.shape[1]}"
        )
    if stride < 1 or pad < 0:
        raise DimensionError(f"conv2d needs stride >= 1 and pad >= 0 (stride={stride}, pad={pad})")
    k = kernel.shape[2]
    if k > x.shape[2] + 2 * pad or k > x.shape[3] + 2 * pad:
        raise DimensionError(
            f"conv2d kernel {k}x{k} larger than padded input {x.shape[2:]} (pad={pad})"
        )


def _windows(x: Tensor, k: int, stride: int, pad: int) -> Tensor:
    """View of shape [N, C, H', W', k, k] over the zero-padded input."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D cross-correlation of [N,C,H,W] with [O,C,k,k] plus a per-channel bias."""
    _check_conv_args(x, kernel, stride, pad)
    if bias.shape != (kernel.shape[0],):
        raise DimensionError(f"conv2d bias must have shape ({kernel.shape[0]},), got {bias.shape}")
    windows = _windows(x, kernel.shape[2], stride, pad)
    out = np.tensordot(windows, kernel, axes=([1, 4, 5], [1, 2, 3]))  # [N, H', W', O]
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return check_finite(np.ascontiguousarray(out), "conv2d output")


def conv2d_backward(
    grad_out: Tensor,
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    pad: int = 0,
) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of a scalar loss w.r.t. (input, kernel, bias) given dL/d(output)."""
    _check_conv_args(x, kernel, stride, pad)
    n, c, h, w = x.shape
    o, _, k, _ = kernel.shape
    ho = conv2d_output_size(h, k, stride, pad)
    wo = conv2d_output_size(w, k, stride, pad)
    if grad_out.shape != (n, o, ho, wo):
        raise DimensionError(
            f"conv2d grad_out shape {grad_out.shape} does not match output {(n, o, ho, wo)}"
        )

    windows = _windows(x, k, stride, pad)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_kernel = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))

    cols = np.tensordot(grad_out, kernel, axes=([1], [0]))  # [N, H', W', C, k, k]
    cols = cols.transpose(0, 3, 1, 2, 4, 5)
    grad_padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
    for p in range(k):
        rows = slice(p, p + stride * (ho - 1) + 1, stride)
        for q in range(k):
            columns = slice(q, q + stride * (wo - 1) + 1, stride)
            grad_padded[:, :, rows, columns] += cols[..., p, q]
    grad_input = grad_padded[:, :, pad:pad + h, pad:pad + w]

    return (
        check_finite(np.ascontiguousarray(grad_input), "conv2d grad_input"),
        check_finite(np.ascontiguousarray(grad_kernel), "conv2d grad_kernel"),
        check_finite(grad_bias, "conv2d grad_bias"),
    )


# ── Upsampling ────────────────────────────────────────────────────


def upsample_nearest_2x(x: Tensor) -> Tensor:
    _require_ndim(x, 4, "upsample input")
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise DimensionError(f"upsample input must have H, W >= 1, got {x.shape}")
    out = np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)
    return check_finite(out, "upsample output")


def upsample_nearest_2x_backward(grad_out: Tensor) -> Tensor:
    """Each source pixel collects the gradient of its four replicas."""
    _require_ndim(grad_out, 4, "upsample grad_out")
    n, c, h2, w2 = grad_out.shape
    if h2 % 2 or w2 % 2:
        raise DimensionError(f"upsample grad_out must have even H, W, got {grad_out.shape}")
    grad = grad_out.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
    return check_finite(grad, "upsample grad_input")


# ── Dense ─────────────────────────────────────────────────────────


def _check_dense_args(x: Tensor, weight: Tensor) -> None:
    _require_ndim(x, 2, "dense input")
    _require_ndim(weight, 2, "dense weight")
    if x.shape[1] != weight.shape[0]:
        raise DimensionError(
            f"dense inner dimensions disagree: input {x.shape}, weight {weight.shape}"
        )


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    _check_dense_args(x, weight)
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"dense bias must have shape ({weight.shape[1]},), got {bias.shape}")
    return check_finite(x @ weight + bias, "dense output")


def dense_backward(
    grad_out: Tensor, x: Tensor, weight: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    _check_dense_args(x, weight)
    if grad_out.shape != (x.shape[0], weight.shape[1]):
        raise DimensionError(f"dense grad_out shape {grad_out.shape} does not match output")
    return (
        check_finite(grad_out @ weight.T, "dense grad_input"),
        check_finite(x.T @ grad_out, "dense grad_weight"),
        check_finite(grad_out.sum(axis=0), "dense grad_bias"),
    )


# ── Activations ───────────────────────────────────────────────────


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(f"leaky_relu slope must satisfy 0 <= alpha < 1, got {alpha}")


def sigmoid(x: Tensor) -> Tensor:
    return np.clip(expit(x), _SIGMOID_LO, _SIGMOID_HI)


def log_sigmoid(x: Tensor) -> Tensor:
    """log(sigmoid(x)) without forming the sigmoid."""
    return -np.logaddexp(0.0, -x)


def one_minus_sigmoid(x: Tensor) -> Tensor:
    """1 - sigmoid(x), exact for large x where the subtraction would cancel."""
    return expit(-x)


def activation(
    kind: Activation | str, x: Tensor, alpha: float = DEFAULT_LEAKY_ALPHA
) -> Tensor:
    kind = Activation(kind)
    if kind is Activation.LEAKY_RELU:
        _check_alpha(alpha)
        out = np.where(x >= 0, x, alpha * x)
    elif kind is Activation.TANH:
        out = np.tanh(x)
    else:
        out = sigmoid(x)
    return check_finite(out, f"{kind.value} output")


def activation_backward(
    kind: Activation | str, x: Tensor, grad_out: Tensor, alpha: float = DEFAULT_LEAKY_ALPHA
) -> Tensor:
    """Elementwise derivative at the forward input ``x`` times ``grad_out``.

    leaky_relu takes the positive branch at exactly 0.
    """
    kind = Activation(kind)
    if grad_out.shape != x.shape:
        raise DimensionError(f"{kind.value} grad_out shape {grad_out.shape} != input {x.shape}")
    if kind is Activation.LEAKY_RELU:
        _check_alpha(alpha)
        grad = grad_out * np.where(x >= 0, 1.0, alpha)
    elif kind is Activation.TANH:
        grad = grad_out * (1.0 - np.tanh(x) ** 2)
    else:
        grad = grad_out * expit(x) * expit(-x)
    return check_finite(grad, f"{kind.value} grad_input")


# ── Binary cross-entropy ──────────────────────────────────────────


def _check_targets(logits_or_pred: Tensor, target: Tensor) -> None:
    if logits_or_pred.shape != target.shape:
        raise DimensionError(
            f"bce shapes differ: prediction {logits_or_pred.shape}, target {target.shape}"
        )
    if not np.isin(target, (0.0, 1.0)).all():
        raise DataError("bce targets must be 0 or 1")


def bce_with_logits(logits: Tensor, target: Tensor) -> float:
    """Mean of -[y log s(z) + (1-y) log(1 - s(z))], via log-sum-exp."""
    _check_targets(logits, target)
    per_item = np.logaddexp(0.0, logits) - target * logits
    loss = float(per_item.mean())
    if not np.isfinite(loss):
        raise NonFiniteError("bce loss")
    return loss


def bce_with_logits_backward(logits: Tensor, target: Tensor) -> Tensor:
    _check_targets(logits, target)
    return check_finite((expit(logits) - target) / logits.size, "bce grad_logits")


def _logit(pred: Tensor) -> Tensor:
    if not ((pred > 0.0) & (pred < 1.0)).all():
        raise DataError("bce predictions must lie strictly inside (0, 1)")
    return np.log(pred) - np.log1p(-pred)


def bce_loss(pred: Tensor, target: Tensor) -> float:
    """Probability-space BCE; evaluated through the logit for stability."""
    _check_targets(pred, target)
    return bce_with_logits(_logit(pred), target)


def bce_loss_backward(pred: Tensor, target: Tensor) -> Tensor:
    _check_targets(pred, target)
    _logit(pred)
    grad = (pred - target) / (pred * (1.0 - pred) * pred.size)
    return check_finite(grad, "bce grad_pred")
