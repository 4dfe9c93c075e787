"""
Command-line interface for the affect pipeline.

Subcommands follow the pipeline order: synth, split, train-stage1,
infer-folds, train-stage2, train-au, evaluate, report. ``grad-check`` runs
the gradient checks of every layer.
"""

import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import structlog

from . import __version__
from .autodiff import run_suite
from .config import TrainConfig, load_config
from .data import synth_generate, write_dataset
from .engine import (
    build_report,
    evaluate_checkpoint,
    infer_folds,
    split_folds,
    train_au,
    train_stage1,
    train_stage2,
)
from .errors import AffectError, exit_code_for, format_error_context
from .loggingx import setup_logging
from .reporting import MarkdownReporter, format_score

GRAD_CHECK_TOLERANCE = 1e-4

logger = structlog.get_logger(__name__)


def _parse_sets(values: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for item in values:
        if "=" not in item:
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--set")
        key, value = (part.strip() for part in item.split("=", 1))
        overrides[key] = value
    return overrides


def _resolve(task: str, config_path: Optional[str], sets: Tuple[str, ...],
             **flags: Any) -> TrainConfig:
    """Resolve the run config and print it before any work starts."""
    overrides = _parse_sets(sets)
    overrides.update({k: v for k, v in flags.items() if v is not None})
    config = load_config(config_path, overrides, task=task)
    click.echo(f"# resolved configuration ({task})")
    click.echo(config.to_text(), nl=False)
    return config


def training_options(func):
    """Options shared by the training commands."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False),
                     help="Config file (key = value text, or YAML)"),
        click.option("--epochs", type=int, help="Training epochs"),
        click.option("--lr", type=float, help="Initial learning rate"),
        click.option("--seed", type=int, help="Random seed"),
        click.option("--batch-size", "batch_size", type=int, help="Windows per batch"),
        click.option("--window", type=int, help="Window length in frames"),
        click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                     help="Override any config key (repeatable)"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(version=__version__)
@click.option("--log-level", default="INFO",
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                                case_sensitive=False),
              help="Logging level")
@click.option("--verbose", is_flag=True, help="Human-readable log output")
@click.option("--log-file", type=click.Path(dir_okay=False), help="Also log to this file")
def cli(log_level: str, verbose: bool, log_file: Optional[str]):
    """Affectkit - two-stage valence-arousal estimation and AU detection."""
    setup_logging(log_level, verbose, log_file)


@cli.command()
@click.option("--videos", default=40, show_default=True, help="Number of videos")
@click.option("--frames", default=400, show_default=True, help="Frames per video")
@click.option("--dim", default=64, show_default=True, help="Feature width")
@click.option("--seed", default=0, show_default=True, help="Generator seed")
@click.option("--labels", default="va", show_default=True,
              type=click.Choice(["va", "au", "none"]), help="Label kind")
@click.option("--val-fraction", default=0.2, show_default=True,
              help="Share of videos in the val split")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory")
def synth(videos: int, frames: int, dim: int, seed: int, labels: str, val_fraction: float,
          out_dir: str):
    """Generate a synthetic dataset with a manifest."""
    records = synth_generate(videos, frames, dim, seed=seed, labels=labels)
    manifest = write_dataset(records, out_dir, seed=seed, val_fraction=val_fraction)
    click.echo(f"Wrote {len(manifest)} videos to {out_dir} "
               f"({len(manifest.ids('train'))} train, {len(manifest.ids('val'))} val)")


@cli.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("-k", "--folds", "k", default=5, show_default=True, help="Number of folds")
@click.option("--seed", default=0, show_default=True, help="Shuffle seed")
def split(manifest: str, k: int, seed: int):
    """Assign train videos to K folds (rewrites MANIFEST)."""
    updated = split_folds(manifest, k=k, seed=seed)
    sizes = [sum(1 for e in updated.by_split("train") if e.fold == fold) for fold in range(k)]
    click.echo(f"Assigned {len(updated.ids('train'))} train videos to {k} folds: {sizes}")


@cli.command("train-stage1")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--runs", "runs_dir", default="runs", show_default=True,
              type=click.Path(file_okay=False), help="Run directory root")
@click.option("--fold", "folds", type=int, multiple=True, help="Train only these folds")
@click.option("--workers", default=1, show_default=True, help="Folds trained concurrently")
@training_options
def train_stage1_command(manifest: str, runs_dir: str, folds: Tuple[int, ...], workers: int,
                         config_path: Optional[str], sets: Tuple[str, ...], **flags):
    """Train the stage-1 fusion model once per fold."""
    config = _resolve("stage1", config_path, sets, **flags)
    results = train_stage1(config, manifest, runs_dir, folds=folds or None,
                           max_workers=workers)
    for fold, result in results.items():
        click.echo(f"fold {fold}: best combined CCC {format_score(result.best_score)} "
                   f"at epoch {result.best_epoch}")


@cli.command("infer-folds")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--runs", "runs_dir", default="runs", show_default=True,
              type=click.Path(file_okay=False), help="Run directory root")
@click.option("--scores", "scores_dir", default="scores", show_default=True,
              type=click.Path(file_okay=False), help="Score output directory")
@click.option("--workers", default=1, show_default=True, help="Folds scored concurrently")
def infer_folds_command(manifest: str, runs_dir: str, scores_dir: str, workers: int):
    """Write out-of-fold vectors for train videos and K-model vectors for val/test."""
    sequences = infer_folds(manifest, runs_dir, scores_dir, max_workers=workers)
    click.echo(f"Wrote fold score vectors for {len(sequences)} videos to {scores_dir}")


@cli.command("train-stage2")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--scores", "scores_dir", default="scores", show_default=True,
              type=click.Path(file_okay=False), help="Fold score directory")
@click.option("--runs", "runs_dir", default="runs", show_default=True,
              type=click.Path(file_okay=False), help="Run directory root")
@click.option("--name", "run_name", default="stage2", show_default=True,
              help="Run subdirectory")
@training_options
def train_stage2_command(manifest: str, scores_dir: str, runs_dir: str, run_name: str,
                         config_path: Optional[str], sets: Tuple[str, ...], **flags):
    """Train the stage-2 stacker on fold score vectors."""
    config = _resolve("stage2", config_path, sets, **flags)
    result = train_stage2(config, manifest, scores_dir, runs_dir, run_name=run_name)
    click.echo(f"stage2: best combined CCC {format_score(result.best_score)} "
               f"at epoch {result.best_epoch}")


@cli.command("train-au")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--runs", "runs_dir", default="runs", show_default=True,
              type=click.Path(file_okay=False), help="Run directory root")
@training_options
def train_au_command(manifest: str, runs_dir: str, config_path: Optional[str],
                     sets: Tuple[str, ...], **flags):
    """Train the dual-Transformer AU detector."""
    config = _resolve("au", config_path, sets, **flags)
    result = train_au(config, manifest, runs_dir)
    click.echo(f"au: best F1 {format_score(result.best_score)} at epoch {result.best_epoch}")


@cli.command()
@click.argument("checkpoint", type=click.Path(dir_okay=False))
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--split", "split_name", default="val", show_default=True,
              type=click.Choice(["train", "val", "test"]), help="Manifest split")
@click.option("--scores", "scores_dir", type=click.Path(file_okay=False),
              help="Fold score directory (stage-2 checkpoints)")
@click.option("--per-video", is_flag=True, help="Also print one row per video")
def evaluate(checkpoint: str, manifest: str, split_name: str, scores_dir: Optional[str],
             per_video: bool):
    """Evaluate CHECKPOINT on one split of MANIFEST."""
    report = evaluate_checkpoint(checkpoint, manifest, split_name, scores_dir)
    if report.kind == "va":
        click.echo("| Split | Valence | Arousal | Combined |")
        click.echo("|---|---|---|---|")
        pooled = report.pooled
        click.echo(f"| {split_name} | {format_score(pooled['valence'])} | "
                   f"{format_score(pooled['arousal'])} | {format_score(pooled['combined'])} |")
    else:
        click.echo(f"F1 ({split_name}): {format_score(report.score)}")
        for name, value in report.per_class.items():
            click.echo(f"  {name}: {format_score(value)}")
    if per_video:
        click.echo(report.per_video.to_string(index=False, float_format=format_score))


@cli.command("grad-check")
@click.option("--seed", default=0, show_default=True, help="Random seed")
@click.option("--tolerance", default=GRAD_CHECK_TOLERANCE, show_default=True,
              help="Largest accepted relative error")
@click.pass_context
def grad_check_command(ctx: click.Context, seed: int, tolerance: float):
    """Finite-difference gradient checks of every layer type and loss."""
    results = run_suite(seed)
    failed = []
    for name, error in results.items():
        status = "ok" if error <= tolerance else "FAIL"
        if status == "FAIL":
            failed.append(name)
        click.echo(f"{name:<22} {error:.3e}  {status}")
    if failed:
        click.echo(f"{len(failed)} check(s) above {tolerance:g}: {', '.join(failed)}", err=True)
        ctx.exit(1)


@cli.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--scores", "scores_dir", default="scores", show_default=True,
              type=click.Path(file_okay=False), help="Fold score directory")
@click.option("--split", "split_name", default="val", show_default=True,
              type=click.Choice(["val", "test"]), help="Manifest split")
@click.option("--gru", "gru_checkpoint", type=click.Path(dir_okay=False),
              help="Stage-2 checkpoint trained without local attention")
@click.option("--gru-attention", "attention_checkpoint", type=click.Path(dir_okay=False),
              help="Stage-2 checkpoint with local attention")
@click.option("--au", "au_checkpoint", type=click.Path(dir_okay=False), help="AU checkpoint")
@click.option("--au-manifest", type=click.Path(dir_okay=False),
              help="Manifest of AU-labelled videos (defaults to MANIFEST)")
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              help="Also write the report to this file")
def report(manifest: str, scores_dir: str, split_name: str, gru_checkpoint: Optional[str],
           attention_checkpoint: Optional[str], au_checkpoint: Optional[str],
           au_manifest: Optional[str], output: Optional[str]):
    """Render the fold and method results tables as Markdown."""
    stage2 = {}
    if gru_checkpoint:
        stage2["GRU"] = gru_checkpoint
    if attention_checkpoint:
        stage2["GRU + Attention"] = attention_checkpoint
    pipeline_report = build_report(manifest, scores_dir, split_name,
                                   stage2_checkpoints=stage2, au_checkpoint=au_checkpoint,
                                   au_manifest=au_manifest)
    reporter = MarkdownReporter()
    click.echo(reporter.render(pipeline_report), nl=False)
    if output:
        reporter.write(pipeline_report, output)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI and map failures to exit codes.

    Returns:
        0 on success, 1 on usage, contract or config errors, 2 on I/O and
        file-format errors
    """
    try:
        result = cli.main(args=argv, prog_name="affectkit", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except (AffectError, OSError) as e:
        logger.error("Command failed", **format_error_context(e))
        click.echo(f"Error: {e}", err=True)
        return exit_code_for(e)
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
