"""Pillow wrapper: decode PNG/PGM to luminance arrays and write 8-bit PNGs."""

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ganaug.errors import ImageDecodeError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")

# ITU-R BT.601 luma weights
REC601 = np.array([0.299, 0.587, 0.114])


def list_image_files(directory: str | Path) -> list[Path]:
    """PNG/PGM files directly inside ``directory``, sorted by name."""
    root = Path(directory)
    return sorted(
        p for p in root.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def decode_luminance(path: str | Path) -> np.ndarray:
    """Decode one image to a [H, W] float64 array in [0, 1].

    Raises:
        ImageDecodeError: If Pillow cannot read the file or its mode is unsupported.
    """
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("1", "LA"):
                img = img.convert("L")
                mode = "L"
            if mode == "L":
                return np.asarray(img, dtype=np.float64) / 255.0
            if mode.startswith("I"):
                return np.asarray(img, dtype=np.float64) / 65535.0
            if mode == "F":
                raise ImageDecodeError(str(path), "floating-point images are not supported")
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
            return rgb @ REC601
    except ImageDecodeError:
        raise
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageDecodeError(str(path), str(e)) from e


def image_dimensions(path: str | Path) -> tuple[int, int]:
    """(width, height) without decoding pixel data."""
    try:
        with Image.open(path) as img:
            return img.size
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageDecodeError(str(path), str(e)) from e


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 8-bit gray levels (round half to even)."""
    return np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(pixels: np.ndarray, path: str | Path) -> str:
    """Write a [H, W] array in [0, 1] as an 8-bit grayscale PNG."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(pixels)).save(out, format="PNG")
    return str(out)
