import logging
import sys
from pathlib import Path

import click

from ganaug.config import build_config, parse_overrides, render_config

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_NUMERICAL = 2


class GanAugGroup(click.Group):
    """Exit codes: 0 success, 1 usage/validation error, 2 numerical failure."""

    def parse_args(self, ctx: click.Context, args: list[str]) -> list[str]:
        try:
            return super().parse_args(ctx, args)
        except click.UsageError as e:
            e.exit_code = EXIT_INVALID
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_INVALID
            raise
        except click.ClickException:
            raise
        except ArithmeticError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_NUMERICAL)
        except ValueError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(EXIT_INVALID)


@click.group(cls=GanAugGroup)
@click.option("--verbose", "-v", is_flag=True, default=False, help="Debug logging.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool) -> None:
    """ganaug - DCGAN training and Fréchet distance evaluation for small image sets"""
    ctx.ensure_object(dict)
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Flat 'key = value' config file.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override one config key (repeatable); beats the config file.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--data", "data_path", default=None, help="Directory of PNG/PGM training images.")
@click.option("--out", "output_dir", default=None, help="Run output directory.")
@click.option("--epochs", type=int, default=None, help="Number of epochs.")
@click.option("--resume", "resume_from", default=None, help="Checkpoint to continue from.")
def train(config_path: str | None, overrides: tuple[str, ...], seed: int | None,
          data_path: str | None, output_dir: str | None, epochs: int | None,
          resume_from: str | None) -> None:
    """Train a generator/discriminator pair on an image directory."""
    from ganaug.core.trainer import train as run_training

    values: dict[str, object] = dict(parse_overrides(overrides))
    flags = {"seed": seed, "data_path": data_path, "output_dir": output_dir,
             "epochs": epochs, "resume_from": resume_from}
    values.update({k: v for k, v in flags.items() if v is not None})
    config = build_config(config_path, values)
    logger.info("Effective config:\n%s", render_config(config).rstrip())

    result = run_training(config)
    last = result.metrics[-1]
    click.echo(
        f"Trained to epoch {last.epoch}: d_loss={last.d_loss:.4f} g_loss={last.g_loss:.4f} "
        f"d_accuracy={last.d_accuracy:.3f}"
    )
    if result.fid_history:
        click.echo(f"Last FID: {result.fid_history[-1].fid:.6f} (epoch {result.fid_history[-1].epoch})")
    click.echo(f"Outputs in {result.output_dir}")


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False),
              help="Checkpoint (.gfc) holding the generator.")
@click.option("--n", "n", type=int, default=64, show_default=True,
              help="Number of samples (perfect square for grids).")
@click.option("--seed", type=int, default=0, show_default=True, help="Latent seed.")
@click.option("--out", "out_path", default=None, help="PNG path for the sample grid.")
@click.option("--real", "real_dir", default=None,
              help="Put a grid of real images from this directory beside the samples.")
@click.option("--images-dir", "images_dir", default=None,
              help="Also write each sample as its own PNG into this directory.")
def generate(checkpoint: str, n: int, seed: int, out_path: str | None,
             real_dir: str | None, images_dir: str | None) -> None:
    """Sample a trained generator into a grid and/or individual images."""
    from ganaug.core.checkpoint import load_checkpoint
    from ganaug.core.data import load_image_directory
    from ganaug.core.grid import comparison_grid, export_samples, sample_grid

    if not out_path and not images_dir:
        raise click.UsageError("Give --out for a grid and/or --images-dir for single images.")
    if real_dir and not out_path:
        raise click.UsageError("--real needs --out.")

    generator = load_checkpoint(checkpoint).generator
    if out_path:
        if real_dir:
            real = load_image_directory(real_dir, generator.spec.img_size)
            path = comparison_grid(real, generator, n, seed, out_path)
        else:
            path = sample_grid(generator, n, seed, out_path)
        click.echo(f"[OK] grid -> {path}")
    if images_dir:
        paths = export_samples(generator, n, seed, images_dir)
        click.echo(f"[OK] {len(paths)} images -> {images_dir}")


@cli.command()
@click.option("--real", "real_dir", required=True, help="Directory of real images.")
@click.option("--fake", "fake_dir", default=None, help="Directory of generated images.")
@click.option("--checkpoint", default=None, type=click.Path(dir_okay=False),
              help="Generate the fake set from this checkpoint's generator instead.")
@click.option("--n", "n", type=int, default=None,
              help="Samples to generate with --checkpoint (default: number of real images).")
@click.option("--seed", type=int, default=0, show_default=True, help="Latent seed for --checkpoint.")
@click.option("--embedder", default="random_projection:32:42", show_default=True,
              help="random_projection[:d[:seed]] or discriminator_features:<checkpoint>.")
@click.option("--image-size", type=int, default=None,
              help="Common image size (default: checkpoint size, else the first real image).")
@click.option("--json-out", "json_out", default=None, type=click.Path(dir_okay=False),
              help="Also write the result as a JSON report to this file.")
def fid(real_dir: str, fake_dir: str | None, checkpoint: str | None, n: int | None, seed: int,
        embedder: str, image_size: int | None, json_out: str | None) -> None:
    """Fréchet distance between real images and a fake directory or checkpoint."""
    from ganaug.core.checkpoint import load_checkpoint
    from ganaug.core.data import ImagePipeline, load_image_directory
    from ganaug.core.fid import GeneratedSource, fid_score, parse_embedder
    from ganaug.services.image_io import image_dimensions, list_image_files

    if (fake_dir is None) == (checkpoint is None):
        raise click.UsageError("Give exactly one of --fake or --checkpoint.")
    kind = parse_embedder(embedder)

    generator = load_checkpoint(checkpoint).generator if checkpoint else None
    if image_size is None:
        if generator is not None:
            image_size = generator.spec.img_size
        else:
            files = list_image_files(real_dir) if Path(real_dir).is_dir() else []
            if not files:
                raise click.UsageError(f"No PNG/PGM images in {real_dir}")
            image_size = max(image_dimensions(files[0]))
    pipeline = ImagePipeline(image_size)

    real = load_image_directory(real_dir, image_size)
    if generator is not None:
        fake_source = GeneratedSource(generator, n or len(real), seed=seed)
    else:
        fake_source = fake_dir
    result = fid_score(real, fake_source, kind, pipeline)

    click.echo(result.line())
    if json_out:
        path = Path(json_out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
        logger.info("FID report written: %s", path)


@cli.command()
@click.option("--tolerance", type=float, default=1e-4, show_default=True,
              help="Maximum relative error per tensor.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the random inputs.")
def gradcheck(tolerance: float, seed: int) -> None:
    """Check every analytic gradient against central finite differences."""
    from ganaug.core.gradcheck import run_suite

    reports = run_suite(tolerance=tolerance, seed=seed)
    click.echo(f"  {'case':<22} {'tensor':<22} {'max_rel_err':>12}  status")
    for report in reports:
        for entry in report.entries:
            status_str = "PASS" if entry.passed else "FAIL"
            click.echo(
                f"  {report.case:<22} {entry.name:<22} {entry.max_rel_error:>12.3e}  {status_str}"
            )
    failed = [r.case for r in reports if not r.passed]
    if failed:
        click.echo(f"FAILED: {', '.join(failed)}", err=True)
        sys.exit(EXIT_NUMERICAL)
    click.echo(f"All {len(reports)} cases PASS at tolerance {tolerance:g}")


@cli.command("synth-data")
@click.option("--n", "n", type=int, required=True, help="Number of images.")
@click.option("--size", type=int, default=16, show_default=True, help="Image side in pixels.")
@click.option("--seed", type=int, default=0, show_default=True, help="Dataset seed.")
@click.option("--class", "blob_class", type=click.Choice(["normal", "anomalous"]),
              default="normal", show_default=True, help="Blob class to render.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
def synth_data(n: int, size: int, seed: int, blob_class: str, out_dir: str) -> None:
    """Write a seeded synthetic blob dataset as PNGs."""
    from ganaug.core.synth import synth_blob_dataset, write_dataset

    dataset = synth_blob_dataset(n, size, seed, blob_class)
    paths = write_dataset(dataset, out_dir)
    click.echo(f"[OK] {len(paths)} {blob_class} images ({size}x{size}) -> {out_dir}")


@cli.command()
@click.option("--run", "run_dir", required=True, help="Training output directory.")
@click.option("--plot", "plot_path", default=None, type=click.Path(dir_okay=False),
              help="Also plot loss and accuracy curves from metrics.csv to this PNG.")
def report(run_dir: str, plot_path: str | None) -> None:
    """Show the run report: per-epoch metrics and FID history."""
    from ganaug.core.trainer import REPORT_FILE
    from ganaug.errors import DataError
    from ganaug.models.schemas import TrainReport

    path = Path(run_dir) / REPORT_FILE
    if not path.is_file():
        raise DataError(f"No report at {path}")
    data = TrainReport.model_validate_json(path.read_text(encoding="utf-8"))

    status_str = "OK" if data.success else "FAILED"
    click.echo(f"[{status_str}] {run_dir}: {data.epochs_completed} epoch(s)")
    if data.error:
        click.echo(f"  Error: {data.error}")
    click.echo(f"  {'epoch':>5} {'d_loss':>10} {'g_loss':>10} {'d_acc':>7} {'time':>8}")
    for m in data.metrics:
        click.echo(
            f"  {m.epoch:>5} {m.d_loss:>10.4f} {m.g_loss:>10.4f} "
            f"{m.d_accuracy:>7.3f} {m.wall_time_s:>7.1f}s"
        )
    for point in data.fid_history:
        click.echo(f"  FID epoch {point.epoch}: {point.fid:.6f}")
    if data.final_checkpoint:
        click.echo(f"  Final checkpoint: {data.final_checkpoint}")
    if plot_path:
        from ganaug.core.plots import load_metrics, plot_training_curves

        path = plot_training_curves(load_metrics(run_dir), plot_path)
        click.echo(f"[OK] curves -> {path}")


def main() -> None:
    cli()
