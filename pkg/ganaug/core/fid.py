"""Fréchet distance between Gaussians fitted to image embeddings.

d^2 = ||mu_x - mu_g||^2 + Tr(S_x + S_g - 2 (S_x S_g)^(1/2))

The cross term is evaluated as Tr((S_x^(1/2) S_g S_x^(1/2))^(1/2)), which has
the same trace but keeps every intermediate symmetric PSD, so only real
symmetric eigendecompositions are needed.
"""

import functools
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ganaug.core.data import ImageDataset, ImagePipeline, load_image_directory
from ganaug.core.ops import Tensor, check_finite
from ganaug.errors import (
    ConfigError,
    DimensionError,
    IndefiniteMatrixError,
    NumericalError,
    SampleCountTooSmall,
)
from ganaug.models.discriminator import discriminator_features
from ganaug.models.generator import generator_forward, sample_latents
from ganaug.models.params import NetworkParams
from ganaug.models.schemas import FidResult

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
EIGEN_CLAMP = 1e-10
NEGATIVE_CLAMP = 1e-9

DEFAULT_EMBEDDER = "random_projection:32:42"


# ── Embeddings ────────────────────────────────────────────────────


@dataclass(frozen=True)
class EmbeddingMatrix:
    data: Tensor  # [n, d]

    def __post_init__(self):
        if self.data.ndim != 2:
            raise DimensionError(f"embedding must be [n, d], got {self.data.shape}")
        if self.data.shape[0] < 2:
            raise SampleCountTooSmall(self.data.shape[0], self.data.shape[1])
        check_finite(self.data, "embedding")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


class RandomProjection(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["random_projection"] = "random_projection"
    d: int = Field(default=32, ge=1)
    seed: int = Field(default=42, ge=0)

    def label(self) -> str:
        return f"random_projection:{self.d}:{self.seed}"


class DiscriminatorFeatures(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["discriminator_features"] = "discriminator_features"
    checkpoint: str

    def label(self) -> str:
        return f"discriminator_features:{self.checkpoint}"


EmbedderKind = RandomProjection | DiscriminatorFeatures


def parse_embedder(text: str) -> EmbedderKind:
    """``random_projection[:d[:seed]]`` or ``discriminator_features:<checkpoint>``."""
    name, _, rest = text.partition(":")
    if name == "random_projection":
        parts = rest.split(":") if rest else []
        if len(parts) > 2:
            raise ConfigError(f"random_projection takes at most d and seed, got '{text}'")
        try:
            values = [int(p) for p in parts]
        except ValueError as e:
            raise ConfigError(f"Bad embedder parameters in '{text}': {e}") from e
        try:
            return RandomProjection(**dict(zip(("d", "seed"), values)))
        except ValidationError as e:
            raise ConfigError(f"Bad embedder parameters in '{text}': {e}") from e
    if name == "discriminator_features":
        if not rest:
            raise ConfigError("discriminator_features needs a checkpoint path")
        return DiscriminatorFeatures(checkpoint=rest)
    raise ConfigError(f"Unknown embedder '{name}' (expected random_projection or "
                      "discriminator_features)")


@functools.lru_cache(maxsize=16)
def projection_matrix(d: int, seed: int, input_dim: int) -> Tensor:
    """Frozen [input_dim, d] matrix with entries ~ Normal(0, 1/d)."""
    rng = np.random.default_rng([seed, input_dim, d])
    matrix = rng.standard_normal((input_dim, d)) / np.sqrt(d)
    matrix.flags.writeable = False
    return matrix


@functools.lru_cache(maxsize=4)
def _load_discriminator(path: str, mtime_ns: int, size: int) -> NetworkParams:
    from ganaug.core.checkpoint import load_checkpoint

    return load_checkpoint(path).discriminator


def _checkpoint_discriminator(path: str) -> NetworkParams:
    """Cached per file version: a rewritten checkpoint is loaded again."""
    try:
        stat = os.stat(path)
    except OSError:
        return _load_discriminator(path, -1, -1)
    return _load_discriminator(path, stat.st_mtime_ns, stat.st_size)


def embed(images: Tensor, kind: EmbedderKind) -> EmbeddingMatrix:
    """Map [N, C, s, s] images in [-1, 1] to an [N, d] embedding."""
    if images.ndim != 4:
        raise DimensionError(f"embed expects [N, C, s, s], got {images.shape}")
    if isinstance(kind, RandomProjection):
        flat = images.reshape(images.shape[0], -1)
        return EmbeddingMatrix(flat @ projection_matrix(kind.d, kind.seed, flat.shape[1]))

    params = _checkpoint_discriminator(kind.checkpoint)
    if params.spec.img_size != images.shape[2]:
        raise DimensionError(
            f"checkpoint discriminator expects {params.spec.img_size}px images, "
            f"got {images.shape[2]}px"
        )
    return EmbeddingMatrix(discriminator_features(params, images))


# ── Gaussian statistics ───────────────────────────────────────────


@dataclass(frozen=True)
class GaussianStats:
    mu: Tensor  # [d]
    sigma: Tensor  # [d, d]

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def gaussian_stats(emb: EmbeddingMatrix | Tensor) -> GaussianStats:
    """Column means and unbiased (n - 1) covariance, symmetrized.

    Raises:
        SampleCountTooSmall: If n <= d.
    """
    data = emb.data if isinstance(emb, EmbeddingMatrix) else np.asarray(emb, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"embedding must be [n, d], got {data.shape}")
    n, d = data.shape
    if n <= d:
        raise SampleCountTooSmall(n, d)
    mu = data.mean(axis=0)
    centered = data - mu
    sigma = centered.T @ centered / (n - 1)
    return GaussianStats(mu=mu, sigma=(sigma + sigma.T) / 2.0)


# ── Matrix square root ────────────────────────────────────────────


def sqrtm_psd(a: Tensor) -> Tensor:
    """Principal square root of a symmetric PSD matrix via eigh.

    Eigenvalues in [-1e-10 * trace, 0) are floating-point noise and are
    clamped to zero; anything more negative is an error.

    Raises:
        IndefiniteMatrixError: If ``a`` is not symmetric or is significantly indefinite.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"sqrtm_psd needs a square matrix, got {a.shape}")
    check_finite(a, "sqrtm_psd input")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_TOL * norm:
        raise IndefiniteMatrixError("sqrtm_psd input is not symmetric")

    eigvals, eigvecs = scipy.linalg.eigh((a + a.T) / 2.0)
    floor = -EIGEN_CLAMP * float(np.trace(a))
    if eigvals.size and eigvals.min() < min(floor, 0.0):
        raise IndefiniteMatrixError(
            f"matrix is indefinite: smallest eigenvalue {eigvals.min():.3e} "
            f"below tolerance {floor:.3e}"
        )
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return (root + root.T) / 2.0


# ── Distance ──────────────────────────────────────────────────────


def frechet_distance(x: GaussianStats, g: GaussianStats) -> float:
    """Squared Wasserstein-2 distance between N(mu_x, S_x) and N(mu_g, S_g)."""
    if x.mu.shape != g.mu.shape or x.sigma.shape != g.sigma.shape:
        raise DimensionError(
            f"statistics dimensions differ: {x.mu.shape[0]} vs {g.mu.shape[0]}"
        )
    diff = x.mu - g.mu
    root_x = sqrtm_psd(x.sigma)
    middle = root_x @ g.sigma @ root_x
    cross = float(np.trace(sqrtm_psd((middle + middle.T) / 2.0)))

    trace_sum = float(np.trace(x.sigma) + np.trace(g.sigma))
    distance = float(diff @ diff) + trace_sum - 2.0 * cross
    if distance < 0.0:
        if distance < -NEGATIVE_CLAMP * max(1.0, trace_sum):
            raise NumericalError(f"Fréchet distance came out negative: {distance:.3e}")
        distance = 0.0
    return distance


# ── End to end ────────────────────────────────────────────────────


@dataclass(frozen=True)
class GeneratedSource:
    """n images drawn from a generator with seeded latents."""
    params: NetworkParams
    n: int
    seed: int = 0
    batch_size: int = 256


ImageSource = str | Path | ImageDataset | GeneratedSource


def collect_images(source: ImageSource, pipeline: ImagePipeline) -> Tensor:
    """Load or generate a source and run it through the shared pipeline."""
    if isinstance(source, GeneratedSource):
        rng = np.random.default_rng(source.seed)
        z_dim = source.params.spec.z_dim
        chunks = []
        for start in range(0, source.n, source.batch_size):
            count = min(source.batch_size, source.n - start)
            chunks.append(generator_forward(source.params, sample_latents(rng, count, z_dim)))
        return pipeline.prepare_generated(np.concatenate(chunks))
    if isinstance(source, ImageDataset):
        return pipeline.prepare_dataset(source)
    return pipeline.prepare_dataset(load_image_directory(source, pipeline.image_size))


def fid_from_images(real: Tensor, fake: Tensor, kind: EmbedderKind) -> FidResult:
    real_emb = embed(real, kind)
    fake_emb = embed(fake, kind)
    score = frechet_distance(gaussian_stats(real_emb), gaussian_stats(fake_emb))
    return FidResult(
        score=score,
        n_real=real_emb.rows,
        n_fake=fake_emb.rows,
        d=real_emb.cols,
        embedder=kind.label(),
    )


def fid_score(
    real_source: ImageSource,
    generated_source: ImageSource,
    kind: EmbedderKind,
    pipeline: ImagePipeline,
) -> FidResult:
    """Load/generate -> shared preprocessing -> embed -> Gaussian fit -> distance."""
    real = collect_images(real_source, pipeline)
    fake = collect_images(generated_source, pipeline)
    result = fid_from_images(real, fake, kind)
    logger.info("FID %.6f (n_real=%d, n_fake=%d, d=%d, %s)",
                result.score, result.n_real, result.n_fake, result.d, result.embedder)
    return result
