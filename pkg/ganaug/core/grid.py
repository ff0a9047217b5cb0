"""Sample grids and per-image exports from a generator."""

import logging
import math
from pathlib import Path

import numpy as np

from ganaug.core.data import ImageDataset, ImagePipeline, scale_from_tanh_range
from ganaug.core.ops import Tensor
from ganaug.errors import ConfigError, DataError
from ganaug.models.generator import generator_forward, sample_latents
from ganaug.models.params import NetworkParams
from ganaug.services.image_io import write_png

logger = logging.getLogger(__name__)

GAP = 2
PANEL_GAP = 3 * GAP
SEPARATOR = 1.0  # white
CHUNK = 256


def grid_side(n: int) -> int:
    """sqrt(n) for a perfect square n >= 1, else ConfigError."""
    side = math.isqrt(n) if n >= 1 else 0
    if n < 1 or side * side != n:
        raise ConfigError(f"grid needs a perfect-square number of images, got {n}")
    return side


def tile_images(images: Tensor, gap: int = GAP, fill: float = SEPARATOR) -> Tensor:
    """Row-major square tiling of [n, H, W] images with ``gap``-pixel separators."""
    if images.ndim != 3:
        raise DataError(f"tile_images expects [n, H, W], got {images.shape}")
    n, h, w = images.shape
    side = grid_side(n)
    canvas = np.full((side * h + (side - 1) * gap, side * w + (side - 1) * gap), fill)
    for idx, img in enumerate(images):
        r, c = divmod(idx, side)
        top, left = r * (h + gap), c * (w + gap)
        canvas[top:top + h, left:left + w] = img
    return canvas


def _to_gray(pixels: Tensor) -> Tensor:
    # [n, C, H, W] in [0, 1] -> [n, H, W]; multi-channel output is averaged
    return pixels.mean(axis=1)


def generate_pixels(params: NetworkParams, n: int, seed: int) -> Tensor:
    """n generator samples from seeded latents, mapped back to [0, 1]."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    z = sample_latents(np.random.default_rng(seed), n, params.spec.z_dim)
    chunks = [generator_forward(params, z[i:i + CHUNK]) for i in range(0, n, CHUNK)]
    return scale_from_tanh_range(np.concatenate(chunks))


def sample_grid(params: NetworkParams, n: int, seed: int, path: str | Path) -> str:
    """Tile n seeded samples into one PNG of (k*s + (k-1)*2)^2 pixels, k = sqrt(n)."""
    grid_side(n)
    canvas = tile_images(_to_gray(generate_pixels(params, n, seed)))
    out = write_png(canvas, path)
    logger.info("Sample grid written: %s (%d images)", out, n)
    return out


def comparison_grid(
    real: ImageDataset, params: NetworkParams, n: int, seed: int, path: str | Path
) -> str:
    """Real grid (first n images by id) on the left, generated grid on the right."""
    grid_side(n)
    if len(real) < n:
        raise DataError(f"comparison grid needs {n} real images, dataset has {len(real)}")
    size = params.spec.img_size
    pipeline = ImagePipeline(size)
    real_pixels = scale_from_tanh_range(pipeline.prepare(real.pixels[:n]))

    left = tile_images(_to_gray(real_pixels))
    right = tile_images(_to_gray(generate_pixels(params, n, seed)))
    gap = np.full((left.shape[0], PANEL_GAP), SEPARATOR)
    out = write_png(np.concatenate([left, gap, right], axis=1), path)
    logger.info("Comparison grid written: %s (%d real, %d generated)", out, n, n)
    return out


def export_samples(params: NetworkParams, n: int, seed: int, out_dir: str | Path) -> list[str]:
    """Write n generated images as gen_00000.png, gen_00001.png, ..."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pixels = _to_gray(generate_pixels(params, n, seed))
    paths = [write_png(img, out / f"gen_{i:05d}.png") for i, img in enumerate(pixels)]
    logger.info("Exported %d generated images to %s", n, out)
    return paths
