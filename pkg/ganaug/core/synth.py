"""Synthetic grayscale blob datasets for desk-scale runs."""

import enum
import logging
from pathlib import Path

import numpy as np

from ganaug.core.data import ImageDataset
from ganaug.errors import ConfigError
from ganaug.services.image_io import write_png

logger = logging.getLogger(__name__)

MIN_SIZE = 16

# Centre of the extra bright blob of the anomalous class, as fractions of (x, y).
ANOMALY_CENTER = (0.72, 0.28)
ANOMALY_SIGMA = 0.07
ANOMALY_AMPLITUDE = 0.9


class BlobClass(str, enum.Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"


def _blob(xx, yy, cx, cy, sx, sy) -> np.ndarray:
    return np.exp(-((xx - cx) ** 2 / (2.0 * sx ** 2) + (yy - cy) ** 2 / (2.0 * sy ** 2)))


def render_blob_image(rng: np.random.Generator, size: int, anomalous: bool) -> np.ndarray:
    """One [size, size] image of 1-3 soft elliptical Gaussian blobs, clipped to [0, 1]."""
    coords = np.arange(size) + 0.5
    xx, yy = np.meshgrid(coords, coords)
    img = np.zeros((size, size))

    for _ in range(int(rng.integers(1, 4))):
        cx, cy = rng.uniform(0.25, 0.75, size=2) * size
        sx, sy = rng.uniform(0.06, 0.16, size=2) * size
        img += rng.uniform(0.35, 0.7) * _blob(xx, yy, cx, cy, sx, sy)

    if anomalous:
        jitter = rng.uniform(-0.03, 0.03, size=2)
        cx = (ANOMALY_CENTER[0] + jitter[0]) * size
        cy = (ANOMALY_CENTER[1] + jitter[1]) * size
        s = ANOMALY_SIGMA * size
        img += ANOMALY_AMPLITUDE * _blob(xx, yy, cx, cy, s, s)

    return np.clip(img, 0.0, 1.0)


def synth_blob_dataset(
    n: int, size: int, seed: int, blob_class: BlobClass | str = BlobClass.NORMAL
) -> ImageDataset:
    """n seeded blob images of one class; identical pixels for identical arguments."""
    blob_class = BlobClass(blob_class)
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if size < MIN_SIZE:
        raise ConfigError(f"size must be >= {MIN_SIZE}, got {size}")
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")

    class_code = list(BlobClass).index(blob_class)
    rng = np.random.default_rng([seed, class_code])
    anomalous = blob_class is BlobClass.ANOMALOUS
    pixels = np.stack([render_blob_image(rng, size, anomalous)[None] for _ in range(n)])
    ids = tuple(f"{blob_class.value}_{i:05d}" for i in range(n))

    logger.info("Synthesized %d %s blob images at %dx%d (seed=%d)",
                n, blob_class.value, size, size, seed)
    return ImageDataset(ids=ids, pixels=pixels, source="synthetic", class_label=blob_class.value)


def write_dataset(dataset: ImageDataset, out_dir: str | Path) -> list[str]:
    """One 8-bit PNG per item, named <id>.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for item_id, pixels in zip(dataset.ids, dataset.pixels):
        stem = Path(item_id).stem
        paths.append(write_png(pixels[0], out / f"{stem}.png"))
    logger.info("Wrote %d images to %s", len(paths), out)
    return paths
