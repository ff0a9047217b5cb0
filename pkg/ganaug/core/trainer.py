"""Adversarial training: alternating discriminator and generator Adam steps.

Per batch, ``d_steps_per_g_step`` discriminator steps (BCE with real=1,
fake=0; generator output treated as a constant) are followed by one
generator step through the current discriminator. Metrics are aggregated
per epoch; checkpoints, sample grids and FID points are emitted on schedule.
"""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ganaug.config import (
    GeneratorLossMode,
    TrainConfig,
    config_fingerprint,
    render_config,
    training_mismatches,
    training_settings,
)
from ganaug.core import ops
from ganaug.core.checkpoint import (
    Checkpoint,
    checkpoint_path,
    encode_rng_state,
    load_checkpoint,
    restore_rng,
    save_checkpoint,
)
from ganaug.core.data import BatchPlan, ImageDataset, ImagePipeline, load_image_directory, make_batches
from ganaug.core.fid import (
    GeneratedSource,
    RandomProjection,
    collect_images,
    fid_from_images,
    parse_embedder,
)
from ganaug.core.grid import sample_grid
from ganaug.core.ops import Tensor
from ganaug.core.optim import AdamState, adam_step
from ganaug.errors import (
    ConfigError,
    DataError,
    NonFiniteError,
    SampleCountTooSmall,
    TrainingDivergedError,
)
from ganaug.models.discriminator import (
    build_discriminator,
    discriminator_backward,
    discriminator_logits_cached,
)
from ganaug.models.generator import (
    build_generator,
    generator_backward,
    generator_forward,
    generator_forward_cached,
    sample_latents,
)
from ganaug.models.params import NetworkParams
from ganaug.models.schemas import EpochMetrics, FidPoint, TrainReport

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
FID_FILE = "fid.csv"
REPORT_FILE = "report.json"
CONFIG_FILE = "config.txt"
METRICS_HEADER = ("epoch", "d_loss", "g_loss", "d_accuracy", "wall_time_s")
FID_HEADER = ("epoch", "fid", "n_real", "n_fake", "d")


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def from_config(cls, config: TrainConfig) -> "AdamHyper":
        return cls(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)


@dataclass
class StepResult:
    """Outcome of one optimizer step on one network."""
    params: NetworkParams
    adam: AdamState
    loss: float
    grads: dict[str, Tensor]
    d_real: Tensor | None = None  # D(x) on the real batch, before the update
    d_fake: Tensor | None = None  # D(G(z)), before the update


@dataclass
class EpochLosses:
    d: list[float] = field(default_factory=list)
    g: list[float] = field(default_factory=list)


# ── Steps ─────────────────────────────────────────────────────────


def discriminator_step(
    discriminator: NetworkParams,
    adam: AdamState,
    generator: NetworkParams,
    real: Tensor,
    z: Tensor,
    hyper: AdamHyper = AdamHyper(),
) -> StepResult:
    """Descend BCE(D(x), 1) + BCE(D(G(z)), 0) in the discriminator only.

    G(z) enters as a constant: no gradient is formed for generator parameters.
    """
    fake = generator_forward(generator, z)
    logits_real, cache_real = discriminator_logits_cached(discriminator, real)
    logits_fake, cache_fake = discriminator_logits_cached(discriminator, fake)
    ones = np.ones_like(logits_real)
    zeros = np.zeros_like(logits_fake)

    loss = ops.bce_with_logits(logits_real, ones) + ops.bce_with_logits(logits_fake, zeros)
    grads_real, _ = discriminator_backward(
        discriminator, cache_real, ops.bce_with_logits_backward(logits_real, ones)
    )
    grads_fake, _ = discriminator_backward(
        discriminator, cache_fake, ops.bce_with_logits_backward(logits_fake, zeros)
    )
    grads = {name: grads_real[name] + grads_fake[name] for name in discriminator.names}

    tensors, new_adam = adam_step(discriminator.tensors, grads, adam, **asdict(hyper))
    return StepResult(
        params=discriminator.replace(tensors),
        adam=new_adam,
        loss=loss,
        grads=grads,
        d_real=ops.sigmoid(logits_real),
        d_fake=ops.sigmoid(logits_fake),
    )


def generator_loss(logits: Tensor, mode: GeneratorLossMode) -> tuple[float, Tensor]:
    """Generator objective on D's logits for G(z), and its gradient w.r.t. those logits.

    minimax:        mean log(1 - D(G(z)))   (the literal minimax objective)
    non_saturating: mean -log D(G(z))
    """
    mode = GeneratorLossMode(mode)
    if mode is GeneratorLossMode.MINIMAX:
        zeros = np.zeros_like(logits)
        return -ops.bce_with_logits(logits, zeros), -ops.bce_with_logits_backward(logits, zeros)
    ones = np.ones_like(logits)
    return ops.bce_with_logits(logits, ones), ops.bce_with_logits_backward(logits, ones)


def generator_step(
    generator: NetworkParams,
    adam: AdamState,
    discriminator: NetworkParams,
    z: Tensor,
    mode: GeneratorLossMode = GeneratorLossMode.NON_SATURATING,
    hyper: AdamHyper = AdamHyper(),
) -> StepResult:
    """Descend the generator objective; discriminator parameters are read, never updated."""
    images, g_cache = generator_forward_cached(generator, z)
    logits, d_cache = discriminator_logits_cached(discriminator, images)
    loss, grad_logits = generator_loss(logits, mode)
    _, grad_images = discriminator_backward(discriminator, d_cache, grad_logits)
    grads, _ = generator_backward(generator, g_cache, grad_images)

    tensors, new_adam = adam_step(generator.tensors, grads, adam, **asdict(hyper))
    return StepResult(
        params=generator.replace(tensors),
        adam=new_adam,
        loss=loss,
        grads=grads,
        d_fake=ops.sigmoid(logits),
    )


# ── Metrics ───────────────────────────────────────────────────────


def _flatten(outputs) -> np.ndarray:
    parts = [np.ravel(np.asarray(o, dtype=np.float64)) for o in outputs]
    return np.concatenate(parts) if parts else np.empty(0)


def compute_metrics(
    d_outputs_real,
    d_outputs_fake,
    losses: EpochLosses,
    epoch: int = 0,
    wall_time_s: float = 0.0,
) -> EpochMetrics:
    """Epoch-mean losses and discriminator accuracy.

    A real sample counts as correct when D(x) > 0.5, a fake one when
    D(G(z)) <= 0.5; accuracy is the correct fraction over all samples.
    """
    real = _flatten(d_outputs_real)
    fake = _flatten(d_outputs_fake)
    total = real.size + fake.size
    if total == 0 or not losses.d or not losses.g:
        raise DataError("cannot compute metrics for an epoch without steps")
    both = np.concatenate([real, fake])
    if both.min() < 0.0 or both.max() > 1.0:
        raise DataError("discriminator outputs must lie in [0, 1]")

    correct = int(np.count_nonzero(real > 0.5)) + int(np.count_nonzero(fake <= 0.5))
    return EpochMetrics(
        epoch=epoch,
        d_loss=float(np.mean(losses.d)),
        g_loss=float(np.mean(losses.g)),
        d_accuracy=correct / total,
        wall_time_s=wall_time_s,
    )


class CsvLog:
    """CSV file with a fixed header, appended one row at a time."""

    def __init__(self, path: str | Path, header: tuple[str, ...]):
        self.path = Path(path)
        self.header = header
        self.rows: list[dict[str, str]] = []

    def _writer(self, f) -> csv.DictWriter:
        return csv.DictWriter(f, fieldnames=self.header, lineterminator="\n")

    def start(self, keep_through: int | None = None) -> None:
        """Truncate the file, keeping existing rows up to epoch ``keep_through`` if given."""
        self.rows = []
        if keep_through is not None and self.path.is_file():
            with self.path.open(newline="", encoding="utf-8") as f:
                self.rows = [r for r in csv.DictReader(f) if int(r["epoch"]) <= keep_through]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="", encoding="utf-8") as f:
            writer = self._writer(f)
            writer.writeheader()
            writer.writerows(self.rows)

    def append(self, row: dict) -> None:
        values = {k: row[k] for k in self.header}
        with self.path.open("a", newline="", encoding="utf-8") as f:
            self._writer(f).writerow(values)
        self.rows.append({k: str(v) for k, v in values.items()})


# ── Training state ────────────────────────────────────────────────


@dataclass
class TrainState:
    generator: NetworkParams
    discriminator: NetworkParams
    generator_adam: AdamState
    discriminator_adam: AdamState
    rng: np.random.Generator
    epoch: int = 0

    def to_checkpoint(self, fingerprint: str, training: dict[str, str] | None = None) -> Checkpoint:
        return Checkpoint(
            epoch=self.epoch,
            generator=self.generator,
            discriminator=self.discriminator,
            generator_adam=self.generator_adam,
            discriminator_adam=self.discriminator_adam,
            rng_state=encode_rng_state(self.rng),
            config_fingerprint=fingerprint,
            training=dict(training or {}),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TrainState":
        return cls(
            generator=ckpt.generator,
            discriminator=ckpt.discriminator,
            generator_adam=ckpt.generator_adam,
            discriminator_adam=ckpt.discriminator_adam,
            rng=restore_rng(ckpt.rng_state),
            epoch=ckpt.epoch,
        )


def init_state(config: TrainConfig) -> TrainState:
    """Fresh networks and optimizer state; every seed derives from config.seed."""
    g_seed, d_seed, loop_seed = (int(s) for s in np.random.SeedSequence(config.seed).generate_state(3))
    generator = build_generator(config.generator_spec(), g_seed)
    discriminator = build_discriminator(config.discriminator_spec(), d_seed)
    return TrainState(
        generator=generator,
        discriminator=discriminator,
        generator_adam=AdamState.zeros_like(generator.tensors),
        discriminator_adam=AdamState.zeros_like(discriminator.tensors),
        rng=np.random.default_rng(loop_seed),
    )


def _check_loss(value: float, name: str) -> None:
    if not np.isfinite(value):
        raise NonFiniteError(name, f"value {value}")


def run_epoch(
    state: TrainState,
    dataset: ImageDataset,
    config: TrainConfig,
    pipeline: ImagePipeline,
) -> EpochMetrics:
    """Train one epoch in place on ``state`` and return its metrics.

    Raises:
        TrainingDivergedError: A loss or gradient became non-finite (records epoch and batch).
    """
    epoch = state.epoch + 1
    hyper = AdamHyper.from_config(config)
    plan = BatchPlan(config.batch_size, shuffle_seed=config.seed, drop_last=config.drop_last)
    z_dim = state.generator.spec.z_dim
    started = time.perf_counter()

    real_outputs: list[Tensor] = []
    fake_outputs: list[Tensor] = []
    losses = EpochLosses()
    for batch_idx, batch in enumerate(make_batches(dataset, plan, epoch), start=1):
        real = pipeline.prepare(batch)
        try:
            for _ in range(config.d_steps_per_g_step):
                z = sample_latents(state.rng, len(real), z_dim)
                d_step = discriminator_step(
                    state.discriminator, state.discriminator_adam, state.generator, real, z, hyper
                )
                _check_loss(d_step.loss, "discriminator loss")
                state.discriminator, state.discriminator_adam = d_step.params, d_step.adam
                real_outputs.append(d_step.d_real)
                fake_outputs.append(d_step.d_fake)
                losses.d.append(d_step.loss)

            z = sample_latents(state.rng, len(real), z_dim)
            g_step = generator_step(
                state.generator, state.generator_adam, state.discriminator, z,
                config.generator_loss_mode, hyper,
            )
            _check_loss(g_step.loss, "generator loss")
            state.generator, state.generator_adam = g_step.params, g_step.adam
            losses.g.append(g_step.loss)
        except NonFiniteError as e:
            raise TrainingDivergedError(epoch, batch_idx, str(e)) from e

    state.epoch = epoch
    wall = time.perf_counter() - started if config.record_wall_time else 0.0
    return compute_metrics(real_outputs, fake_outputs, losses, epoch=epoch, wall_time_s=wall)


# ── FID tracking ──────────────────────────────────────────────────


class FidTracker:
    """FID of the current generator against the training set, logged to fid.csv."""

    def __init__(
        self,
        config: TrainConfig,
        dataset: ImageDataset,
        pipeline: ImagePipeline,
        path: str | Path,
        keep_through: int | None = None,
    ):
        self.kind = parse_embedder(config.fid_embedder)
        self.n = min(config.fid_samples or len(dataset), len(dataset))
        if isinstance(self.kind, RandomProjection) and self.n <= self.kind.d:
            raise SampleCountTooSmall(self.n, self.kind.d)
        self.pipeline = pipeline
        self.seed = config.seed
        self.real = collect_images(dataset, pipeline)[: self.n]
        self.log = CsvLog(path, FID_HEADER)
        self.log.start(keep_through)

    def history(self) -> list[FidPoint]:
        return [FidPoint(**row) for row in self.log.rows]

    def evaluate(self, generator: NetworkParams, epoch: int) -> FidPoint:
        fake = collect_images(GeneratedSource(generator, self.n, seed=self.seed), self.pipeline)
        result = fid_from_images(self.real, fake, self.kind)
        point = FidPoint(epoch=epoch, fid=result.score, n_real=result.n_real,
                         n_fake=result.n_fake, d=result.d)
        self.log.append(point.model_dump())
        logger.info("Epoch %d FID: %.6f (%s)", epoch, point.fid, result.embedder)
        return point


# ── Orchestration ─────────────────────────────────────────────────


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    metrics: list[EpochMetrics]
    fid_history: list[FidPoint]
    output_dir: str
    report_path: str


def _due(epoch: int, every: int) -> bool:
    return every > 0 and epoch % every == 0


def write_report(report: TrainReport, output_dir: str | Path) -> str:
    """Write a TrainReport as JSON to <output_dir>/report.json.

    Returns:
        Path to the written report file.
    """
    path = Path(output_dir) / REPORT_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    data = report.model_dump(mode="json")
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")
    logger.info("Report written: %s", path)
    return str(path)


def _resolve_dataset(config: TrainConfig, dataset: ImageDataset | None) -> ImageDataset:
    if dataset is None:
        if not config.data_path:
            raise ConfigError("data_path is required when no dataset is supplied")
        dataset = load_image_directory(config.data_path, config.img_size)
    if len(dataset) == 0:
        raise DataError("training dataset is empty")
    if dataset.channels != config.channels:
        raise ConfigError(
            f"dataset has {dataset.channels} channel(s), config expects {config.channels}"
        )
    return dataset


def _train(
    config: TrainConfig, dataset: ImageDataset | None, out: Path, report: TrainReport
) -> TrainResult:
    dataset = _resolve_dataset(config, dataset)
    pipeline = ImagePipeline(config.img_size)
    fingerprint = config_fingerprint(config)
    settings = training_settings(config)

    keep_through = None
    if config.resume_from:
        ckpt = load_checkpoint(config.resume_from, expected_fingerprint=fingerprint)
        if ckpt.epoch >= config.epochs:
            raise ConfigError(
                f"checkpoint is at epoch {ckpt.epoch}; epochs={config.epochs} leaves nothing to train"
            )
        for name, (recorded, current) in training_mismatches(ckpt.training, config).items():
            logger.warning(
                "Resume: %s was %s in the checkpointed run, now %s; "
                "the result will differ from an uninterrupted run", name, recorded, current,
            )
        state = TrainState.from_checkpoint(ckpt)
        keep_through = ckpt.epoch
        logger.info("Resuming from %s at epoch %d", config.resume_from, ckpt.epoch)
    else:
        state = init_state(config)

    metrics_log = CsvLog(out / METRICS_FILE, METRICS_HEADER)
    metrics_log.start(keep_through)
    report.metrics = [EpochMetrics(**row) for row in metrics_log.rows]
    report.epochs_completed = state.epoch

    tracker = None
    if config.fid_every > 0:
        tracker = FidTracker(config, dataset, pipeline, out / FID_FILE, keep_through)
        report.fid_history = tracker.history()
        if state.epoch == 0:
            report.fid_history.append(tracker.evaluate(state.generator, 0))

    logger.info(
        "Training %d images at %dx%d for epochs %d..%d (batch %d, %s)",
        len(dataset), config.img_size, config.img_size, state.epoch + 1, config.epochs,
        config.batch_size, config.generator_loss_mode.value,
    )
    final_path = ""
    for epoch in range(state.epoch + 1, config.epochs + 1):
        metrics = run_epoch(state, dataset, config, pipeline)
        metrics_log.append(metrics.model_dump())
        report.metrics.append(metrics)
        report.epochs_completed = epoch
        logger.info(
            "Epoch %d/%d: d_loss=%.4f g_loss=%.4f d_acc=%.3f (%.1fs)",
            epoch, config.epochs, metrics.d_loss, metrics.g_loss,
            metrics.d_accuracy, metrics.wall_time_s,
        )

        last = epoch == config.epochs
        if config.sample_grid_every > 0 and (_due(epoch, config.sample_grid_every) or last):
            sample_grid(state.generator, config.grid_size, config.seed,
                        out / f"samples_{epoch}.png")
        if tracker is not None and (_due(epoch, config.fid_every) or last):
            report.fid_history.append(tracker.evaluate(state.generator, epoch))
        if _due(epoch, config.checkpoint_every) or last:
            final_path = save_checkpoint(
                state.to_checkpoint(fingerprint, settings), checkpoint_path(out, epoch)
            )

    report.final_checkpoint = final_path
    report.success = True
    return TrainResult(
        checkpoint=state.to_checkpoint(fingerprint, settings),
        metrics=list(report.metrics),
        fid_history=list(report.fid_history),
        output_dir=str(out),
        report_path=str(out / REPORT_FILE),
    )


def train(config: TrainConfig, dataset: ImageDataset | None = None) -> TrainResult:
    """Run (or resume) a training run; everything lands in config.output_dir.

    Writes config.txt, metrics.csv, ckpt_<epoch>.gfc, samples_<epoch>.png,
    fid.csv (when fid_every > 0) and report.json. The report is written on
    failure too, with the error recorded.

    Raises:
        ConfigError / DataError: Invalid configuration or dataset.
        TrainingDivergedError: A loss or gradient went non-finite.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rendered = render_config(config)
    (out / CONFIG_FILE).write_text(rendered, encoding="utf-8")

    stamp = config.record_wall_time
    report = TrainReport(
        started_at=_utcnow().isoformat() if stamp else None,
        config=config.model_dump(mode="json"),
    )
    try:
        return _train(config, dataset, out, report)
    except Exception as e:
        report.error = str(e)
        logger.error("Training failed: %s", e)
        raise
    finally:
        report.completed_at = _utcnow().isoformat() if stamp else None
        write_report(report, out)
