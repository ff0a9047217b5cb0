"""Tests for Gaussian statistics, the PSD square root and the Fréchet distance."""

import os

import numpy as np
import pytest

from ganaug.core.checkpoint import save_checkpoint
from ganaug.core.data import ImagePipeline
from ganaug.core.fid import (
    DiscriminatorFeatures,
    GaussianStats,
    GeneratedSource,
    RandomProjection,
    collect_images,
    embed,
    fid_from_images,
    fid_score,
    frechet_distance,
    gaussian_stats,
    parse_embedder,
    projection_matrix,
    sqrtm_psd,
)
from ganaug.core.synth import synth_blob_dataset
from ganaug.errors import (
    ConfigError,
    DimensionError,
    IndefiniteMatrixError,
    SampleCountTooSmall,
)
from ganaug.models.discriminator import build_discriminator, discriminator_features
from ganaug.models.generator import build_generator
from tests.conftest import make_checkpoint


def _random_spd(rng, d: int) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return a @ a.T / d + 0.1 * np.eye(d)


def _denman_beavers(a: np.ndarray, iters: int = 60) -> np.ndarray:
    y, z = a.copy(), np.eye(a.shape[0])
    for _ in range(iters):
        y_next = (y + np.linalg.inv(z)) / 2.0
        z = (z + np.linalg.inv(y)) / 2.0
        if np.linalg.norm(y_next - y) < 1e-14 * np.linalg.norm(y):
            return y_next
        y = y_next
    return y


def _naive_frechet(x: GaussianStats, g: GaussianStats) -> float:
    """Cross term from the eigenvalues of the non-symmetric product S_x S_g."""
    eig = np.linalg.eigvals(x.sigma @ g.sigma)
    cross = np.sum(np.sqrt(np.clip(eig.real, 0.0, None)))
    diff = x.mu - g.mu
    return float(diff @ diff + np.trace(x.sigma) + np.trace(g.sigma) - 2.0 * cross)


def _stats(mu, sigma) -> GaussianStats:
    return GaussianStats(mu=np.atleast_1d(np.asarray(mu, float)),
                         sigma=np.atleast_2d(np.asarray(sigma, float)))


# ── Analytic cases ────────────────────────────────────────────────


class TestFrechetDistance:
    def test_identity_is_zero(self, rng):
        s = _stats(rng.standard_normal(8), _random_spd(rng, 8))
        assert frechet_distance(s, s) == pytest.approx(0.0, abs=1e-9)

    def test_one_dimensional(self):
        assert frechet_distance(_stats([0.0], [[1.0]]), _stats([3.0], [[1.0]])) == pytest.approx(
            9.0, abs=1e-9
        )

    def test_two_dimensional_diagonal(self):
        x = _stats([0.0, 0.0], np.diag([1.0, 1.0]))
        g = _stats([0.0, 0.0], np.diag([9.0, 1.0]))
        # (1 + 9 - 2*3) + (1 + 1 - 2*1)
        assert frechet_distance(x, g) == pytest.approx(4.0, abs=1e-9)

    def test_pure_mean_shift(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            sigma = _random_spd(rng, 16)
            mu = rng.standard_normal(16)
            delta = rng.standard_normal(16)
            d2 = frechet_distance(_stats(mu, sigma), _stats(mu + delta, sigma))
            assert d2 == pytest.approx(float(delta @ delta), rel=1e-9)

    def test_literal_two_dimensional_case(self):
        x = _stats([0.0, 0.0], np.eye(2))
        g = _stats([1.0, 1.0], 4.0 * np.eye(2))
        # |dmu|^2 = 2, tr(I) + tr(4I) - 2 tr(2I) = 2
        assert frechet_distance(x, g) == pytest.approx(4.0, abs=1e-9)

    def test_one_dimensional_closed_form(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            mx, mg = rng.normal(0, 3, 2)
            sx, sg = rng.uniform(0.1, 3.0, 2)
            d2 = frechet_distance(_stats([mx], [[sx * sx]]), _stats([mg], [[sg * sg]]))
            assert d2 == pytest.approx((mx - mg) ** 2 + (sx - sg) ** 2, rel=1e-9, abs=1e-9)

    def test_mean_shift_scales_quadratically(self, rng):
        sigma = _random_spd(rng, 6)
        mu = rng.standard_normal(6)
        delta = rng.standard_normal(6)
        base = frechet_distance(_stats(mu, sigma), _stats(mu + delta, sigma))
        for t in (0.5, 2.0, 3.0):
            scaled = frechet_distance(_stats(mu, sigma), _stats(mu + t * delta, sigma))
            assert scaled == pytest.approx(t * t * base, rel=1e-9)

    def test_matches_naive_eigen_oracle(self):
        rng = np.random.default_rng(1)
        for d in (2, 5, 12):
            x = _stats(rng.standard_normal(d), _random_spd(rng, d))
            g = _stats(rng.standard_normal(d), _random_spd(rng, d))
            assert frechet_distance(x, g) == pytest.approx(_naive_frechet(x, g), rel=1e-8)

    def test_symmetric_in_arguments(self, rng):
        x = _stats(rng.standard_normal(6), _random_spd(rng, 6))
        g = _stats(rng.standard_normal(6), _random_spd(rng, 6))
        assert frechet_distance(x, g) == pytest.approx(frechet_distance(g, x), rel=1e-10)

    def test_singular_covariances_allowed(self):
        x = _stats([0.0, 0.0], np.diag([1.0, 0.0]))
        g = _stats([1.0, 0.0], np.diag([0.0, 1.0]))
        assert frechet_distance(x, g) == pytest.approx(3.0, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            frechet_distance(_stats([0.0], [[1.0]]), _stats([0.0, 0.0], np.eye(2)))


class TestSqrtmPsd:
    def test_matches_denman_beavers(self):
        rng = np.random.default_rng(2)
        for i in range(50):
            d = 1 + (i * 63) // 49
            a = _random_spd(rng, d)
            assert np.linalg.norm(sqrtm_psd(a) - _denman_beavers(a)) < 1e-7

    def test_recovers_square_root_of_square(self):
        rng = np.random.default_rng(3)
        for d in (1, 4, 16, 64):
            s = _random_spd(rng, d)
            assert np.linalg.norm(sqrtm_psd(s @ s) - s) < 1e-7

    def test_output_symmetric(self, rng):
        root = sqrtm_psd(_random_spd(rng, 10))
        np.testing.assert_array_equal(root, root.T)

    def test_tiny_negative_eigenvalue_clamped(self):
        root = sqrtm_psd(np.diag([1.0, -1e-14]))
        np.testing.assert_allclose(root, np.diag([1.0, 0.0]), atol=1e-15)

    def test_indefinite_rejected(self):
        with pytest.raises(IndefiniteMatrixError, match="indefinite"):
            sqrtm_psd(np.diag([1.0, -0.5]))

    def test_asymmetric_rejected(self):
        with pytest.raises(IndefiniteMatrixError, match="symmetric"):
            sqrtm_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_non_square(self):
        with pytest.raises(DimensionError):
            sqrtm_psd(np.ones((2, 3)))


# ── Statistics and rank guard ─────────────────────────────────────


class TestGaussianStats:
    def test_unbiased_covariance(self, rng):
        data = rng.standard_normal((50, 3))
        stats = gaussian_stats(data)
        np.testing.assert_allclose(stats.mu, data.mean(axis=0))
        np.testing.assert_allclose(stats.sigma, np.cov(data, rowvar=False), rtol=1e-12)

    def test_rank_guard_property(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            d = int(rng.integers(1, 64))
            n = int(rng.integers(1, d + 1))
            with pytest.raises(SampleCountTooSmall) as info:
                gaussian_stats(rng.standard_normal((n, d)))
            assert info.value.n == n and info.value.d == d

    def test_message_names_remedy(self):
        with pytest.raises(SampleCountTooSmall, match="need n > d"):
            gaussian_stats(np.zeros((10, 32)))

    def test_n_just_above_d(self, rng):
        assert gaussian_stats(rng.standard_normal((5, 4))).dim == 4


# ── Embedders ─────────────────────────────────────────────────────


class TestEmbedders:
    def test_parse_default_syntax(self):
        assert parse_embedder("random_projection:32:42") == RandomProjection(d=32, seed=42)
        assert parse_embedder("random_projection") == RandomProjection()
        assert parse_embedder("random_projection:8") == RandomProjection(d=8, seed=42)
        assert parse_embedder("discriminator_features:runs/x/ckpt_5.gfc") == DiscriminatorFeatures(
            checkpoint="runs/x/ckpt_5.gfc"
        )

    @pytest.mark.parametrize("text", [
        "inception", "random_projection:abc", "random_projection:0",
        "random_projection:1:2:3", "discriminator_features",
    ])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_embedder(text)

    def test_label_roundtrip(self):
        kind = RandomProjection(d=16, seed=3)
        assert parse_embedder(kind.label()) == kind

    def test_projection_frozen_and_cached(self):
        a = projection_matrix(32, 42, 256)
        assert a is projection_matrix(32, 42, 256)
        assert not a.flags.writeable
        assert a.shape == (256, 32)
        assert a.var() == pytest.approx(1 / 32, rel=0.1)

    def test_random_projection_embedding(self, rng):
        images = rng.uniform(-1, 1, (40, 1, 16, 16))
        emb = embed(images, RandomProjection(d=8, seed=1))
        assert (emb.rows, emb.cols) == (40, 8)

    def test_random_projection_is_linear(self, rng):
        images = rng.uniform(-1, 1, (10, 1, 16, 16))
        kind = RandomProjection(d=16, seed=7)
        np.testing.assert_allclose(embed(0.37 * images, kind).data, 0.37 * embed(images, kind).data,
                                   rtol=1e-12, atol=1e-14)

    def test_discriminator_features_embedding(self, checkpoint_file, rng):
        images = rng.uniform(-1, 1, (5, 1, 16, 16))
        emb = embed(images, DiscriminatorFeatures(checkpoint=str(checkpoint_file)))
        assert emb.cols == 4 * 8  # base_channels * 8 * (16/16)^2

    def test_rewritten_checkpoint_is_reloaded(self, tmp_path, gen_spec, disc_spec, rng):
        path = tmp_path / "disc.gfc"
        ckpt = make_checkpoint(gen_spec, disc_spec)
        save_checkpoint(ckpt, path)
        images = rng.uniform(-1, 1, (4, 1, 16, 16))
        kind = DiscriminatorFeatures(checkpoint=str(path))
        before = embed(images, kind).data

        ckpt.discriminator = build_discriminator(disc_spec, 5)
        save_checkpoint(ckpt, path)
        stat = path.stat()
        os.utime(path, ns=(stat.st_atime_ns, stat.st_mtime_ns + 10**9))
        after = embed(images, kind).data

        assert not np.array_equal(before, after)
        np.testing.assert_array_equal(after, discriminator_features(ckpt.discriminator, images))

    def test_discriminator_features_size_mismatch(self, checkpoint_file, rng):
        with pytest.raises(DimensionError):
            embed(rng.uniform(-1, 1, (5, 1, 32, 32)),
                  DiscriminatorFeatures(checkpoint=str(checkpoint_file)))


# ── End to end ────────────────────────────────────────────────────


class TestFidScore:
    def test_identical_sets_score_zero(self, rng):
        images = rng.uniform(-1, 1, (60, 1, 16, 16))
        result = fid_from_images(images, images.copy(), RandomProjection(d=32, seed=42))
        assert result.score == pytest.approx(0.0, abs=1e-8)
        assert result.line().startswith("FID=0.000000 n_real=60 n_fake=60 d=32")

    def test_too_few_images(self, rng):
        images = rng.uniform(-1, 1, (10, 1, 16, 16))
        with pytest.raises(SampleCountTooSmall):
            fid_from_images(images, images, RandomProjection(d=32, seed=42))

    def test_shifted_set_scores_higher(self, rng):
        real = rng.uniform(-0.5, 0.5, (80, 1, 16, 16))
        near = rng.uniform(-0.5, 0.5, (80, 1, 16, 16))
        far = near + 0.4
        kind = RandomProjection(d=8, seed=0)
        assert fid_from_images(real, far, kind).score > fid_from_images(real, near, kind).score

    def test_directory_against_generator(self, image_dir, gen_spec):
        generator = build_generator(gen_spec, 0)
        result = fid_score(image_dir, GeneratedSource(generator, 20, seed=1),
                           RandomProjection(d=4, seed=1), ImagePipeline(16))
        assert (result.n_real, result.n_fake, result.d) == (20, 20, 4)
        assert np.isfinite(result.score) and result.score >= 0.0

    def test_generated_source_deterministic(self, gen_spec):
        generator = build_generator(gen_spec, 0)
        pipeline = ImagePipeline(16)
        a = collect_images(GeneratedSource(generator, 7, seed=3, batch_size=3), pipeline)
        b = collect_images(GeneratedSource(generator, 7, seed=3, batch_size=7), pipeline)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_noise_halves_closer_than_noise_to_blobs(self):
        rng = np.random.default_rng(6)
        pipeline = ImagePipeline(16)
        noise = pipeline.prepare(rng.uniform(0, 1, (500, 1, 16, 16)))
        blobs = pipeline.prepare_dataset(synth_blob_dataset(250, 16, seed=5))
        kind = RandomProjection(d=32, seed=42)
        same = fid_from_images(noise[:250], noise[250:], kind).score
        different = fid_from_images(noise[:250], blobs, kind).score
        assert same < different

    def test_untrained_generator_farther_than_real_split(self, gen_spec):
        pipeline = ImagePipeline(16)
        real = pipeline.prepare_dataset(synth_blob_dataset(500, 16, seed=11))
        fake = collect_images(GeneratedSource(build_generator(gen_spec, 0), 250, seed=1), pipeline)
        kind = RandomProjection(d=32, seed=42)
        split = fid_from_images(real[:250], real[250:], kind).score
        untrained = fid_from_images(real[:250], fake, kind).score
        assert untrained > split
