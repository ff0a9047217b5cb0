"""Image datasets, preprocessing to the generator's [-1, 1] contract, and batching."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ganaug.core.ops import Tensor
from ganaug.errors import ConfigError, DataError
from ganaug.services.image_io import decode_luminance, list_image_files

logger = logging.getLogger(__name__)

RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class ImageDataset:
    """Immutable stack of images in [0, 1], ordered by id."""
    ids: tuple[str, ...]
    pixels: Tensor  # [N, C, H, W]
    source: str = "synthetic"
    class_label: str | None = None

    def __post_init__(self):
        if self.pixels.ndim != 4:
            raise DataError(f"dataset pixels must be [N, C, H, W], got {self.pixels.shape}")
        if len(self.ids) != self.pixels.shape[0]:
            raise DataError(f"{len(self.ids)} ids for {self.pixels.shape[0]} images")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("dataset ids must be unique")
        if list(self.ids) != sorted(self.ids):
            raise DataError("dataset ids must be sorted")
        self.pixels.flags.writeable = False

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def channels(self) -> int:
        return self.pixels.shape[1]


# ── Preprocessing ─────────────────────────────────────────────────


def _axis_taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel-centre source positions for each output index."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(pixels: Tensor, target: int) -> Tensor:
    """Bilinear resize of [C, H, W] to [C, target, target].

    Sampling uses half-pixel centres (corners not aligned) and the aspect
    ratio is not preserved. A constant image stays exactly constant and
    target == H == W returns the input values unchanged.
    """
    if pixels.ndim != 3 or pixels.shape[1] < 1 or pixels.shape[2] < 1:
        raise DataError(f"resize expects [C, H, W] with H, W >= 1, got {pixels.shape}")
    if target < 1:
        raise DataError(f"resize target must be >= 1, got {target}")
    _, h, w = pixels.shape

    lo, hi, frac = _axis_taps(h, target)
    top = pixels[:, lo, :]
    rows = top + frac[None, :, None] * (pixels[:, hi, :] - top)

    lo, hi, frac = _axis_taps(w, target)
    left = rows[:, :, lo]
    return left + frac[None, None, :] * (rows[:, :, hi] - left)


def scale_to_tanh_range(pixels: Tensor) -> Tensor:
    """x -> 2x - 1 for x in [0, 1]."""
    if pixels.size and (pixels.min() < -RANGE_SLACK or pixels.max() > 1.0 + RANGE_SLACK):
        raise DataError(
            f"pixels must lie in [0, 1]; got range [{pixels.min():.6g}, {pixels.max():.6g}]"
        )
    return 2.0 * pixels - 1.0


def scale_from_tanh_range(values: Tensor) -> Tensor:
    """Inverse of scale_to_tanh_range, clamped to [0, 1].

    The round trip is exact for dyadic inputs k/2^m (m <= 52), which covers
    k/256 but not the 8-bit levels k/255; those come back within 2**-52
    absolute.
    """
    return np.clip((values + 1.0) / 2.0, 0.0, 1.0)


class ImagePipeline:
    """The single preprocessing path shared by every image source.

    Real images ([0, 1], any size) and generator output ([-1, 1], network
    size) both leave ``prepare`` as [-1, 1] tensors at ``image_size``.
    """

    def __init__(self, image_size: int):
        if image_size < 1:
            raise ConfigError(f"image_size must be >= 1, got {image_size}")
        self.image_size = image_size

    def prepare(self, pixels: Tensor) -> Tensor:
        """[N, C, H, W] in [0, 1] -> [N, C, s, s] in [-1, 1]."""
        if pixels.ndim != 4:
            raise DataError(f"expected [N, C, H, W], got {pixels.shape}")
        if pixels.shape[2:] != (self.image_size, self.image_size):
            pixels = np.stack([resize_bilinear(p, self.image_size) for p in pixels])
        return scale_to_tanh_range(pixels)

    def prepare_dataset(self, dataset: ImageDataset) -> Tensor:
        return self.prepare(dataset.pixels)

    def prepare_generated(self, images: Tensor) -> Tensor:
        return self.prepare(scale_from_tanh_range(images))


# ── Loading ───────────────────────────────────────────────────────


def load_image_directory(
    path: str | Path,
    target_size: int,
    class_label: str | None = None,
    workers: int = 4,
) -> ImageDataset:
    """Decode every PNG/PGM in ``path`` to luminance at target_size x target_size.

    Files are decoded in parallel; the result is ordered by file name.

    Raises:
        DataError: If the directory is missing or holds no PNG/PGM files.
        ImageDecodeError: If any file cannot be decoded (names the file).
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"Image directory not found: {root}")
    files = list_image_files(root)
    if not files:
        raise DataError(f"No PNG/PGM images in {root}")

    def _load(file: Path) -> Tensor:
        return resize_bilinear(decode_luminance(file)[None], target_size)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        images = list(pool.map(_load, files))

    logger.info("Loaded %d images from %s at %dx%d", len(images), root, target_size, target_size)
    return ImageDataset(
        ids=tuple(f.name for f in files),
        pixels=np.stack(images),
        source=str(root),
        class_label=class_label,
    )


# ── Batching ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    shuffle_seed: int = 0
    drop_last: bool = False

    def __post_init__(self):
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be > 0, got {self.batch_size}")
        if self.shuffle_seed < 0:
            raise ConfigError(f"shuffle_seed must be >= 0, got {self.shuffle_seed}")


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    """Order of the n items in a given epoch; a pure function of (n, seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def make_batches(dataset: ImageDataset, plan: BatchPlan, epoch: int = 0) -> list[Tensor]:
    """Shuffled copies of the dataset pixels, batch_size at a time."""
    n = len(dataset)
    if plan.drop_last and plan.batch_size > n:
        raise ConfigError(
            f"batch_size {plan.batch_size} exceeds dataset size {n} with drop_last set"
        )
    order = epoch_permutation(n, plan.shuffle_seed, epoch)
    batches = []
    for start in range(0, n, plan.batch_size):
        idx = order[start:start + plan.batch_size]
        if plan.drop_last and len(idx) < plan.batch_size:
            break
        batches.append(dataset.pixels[idx])
    return batches
