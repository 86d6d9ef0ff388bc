"""Main entry point for intentseq."""

import sys
import time
from collections.abc import Sequence
from datetime import UTC, datetime
from pathlib import Path
from typing import Any, cast

import pandas as pd
import typer
from pydantic import ValidationError

from . import __version__
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import (
    DatasetSplit,
    Window,
    build_windows,
    class_balance_stats,
    load_corpus,
    read_split_csv,
    split_dataset,
    write_split_csv,
)
from .errors import IntentSeqError
from .inference import DEFAULT_REPS, bench_latency, replay_video, write_predictions_csv
from .models.intent import (
    Difficulty,
    Granularity,
    ModelConfig,
    ModelKind,
    OptimizerKind,
    RunManifest,
    SplitSpec,
    TrainConfig,
)
from .networks import ModelParameters, count_params, init_params, model_summary
from .synthgen import MANIFEST_NAME, generate_corpus
from .training import evaluate, train, velocity_baseline_auc, write_metrics_csv
from .utils import format_error, setup_logging, validate_environment, write_run_manifest

app = typer.Typer(
    name="intentseq",
    help="intentseq - pedestrian crossing-intent sequence models on pose-landmark windows",
    add_completion=False,
)


# typer may ship its own click build, so the usage-error base is taken from the class typer exports.
UsageError: type[Exception] = next(
    (c for c in typer.BadParameter.__mro__ if c.__name__ == "UsageError"), typer.BadParameter
)

# Config fields whose option name is not the field name with dashes.
FLAG_NAMES = {
    "kind": "--model",
    "dropout_p": "--dropout",
    "learning_rate": "--lr",
    "test_fraction": "--test",
    "val_fraction": "--val",
}


class ConflictingFlagsError(typer.BadParameter):
    """Two flags that exclude each other were both given."""


class MissingFlagError(typer.BadParameter):
    """None of a set of alternative flags was given."""


@app.callback()
def configure(
    log_level: str | None = typer.Option(
        None, "--log-level", help="Set logging level (DEBUG, INFO, WARNING, ERROR); defaults to INTENTSEQ_LOG_LEVEL"
    ),
):
    """Pedestrian crossing-intent models: synthesize, prepare, train, evaluate, stream and benchmark."""
    setup_logging(log_level or validate_environment()["settings"]["log_level"])


def _record(
    subcommand: str,
    started_at: datetime,
    t0: float,
    config: dict[str, Any],
    seeds: dict[str, int],
    inputs: list[Path],
    outputs: list[Path],
) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config=config,
        seeds=seeds,
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
        tool_version=__version__,
        started_at=started_at,
        duration_s=time.perf_counter() - t0,
    )
    for artifact in outputs:
        write_run_manifest(manifest, artifact)


def _windows(data: Path, seq_len: int, standardize: bool) -> list[Window]:
    windows: list[Window] = []
    for video in load_corpus(data):
        windows.extend(build_windows(video, seq_len, standardize))
    return windows


def _split(
    data: Path, split_file: Path | None, seq_len: int, spec: SplitSpec, standardize: bool
) -> DatasetSplit:
    windows = _windows(data, seq_len, standardize)
    if split_file is not None:
        return read_split_csv(split_file, windows)
    return split_dataset(windows, spec)


def _echo_balance(name: str, windows: Sequence[Window]) -> None:
    positives, negatives, fraction = class_balance_stats(windows)
    typer.echo(
        f"  {name:<6} {len(windows):>7} windows  {positives:>7} positive  {negatives:>7} negative  ({fraction:.1%})"
    )


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", help="Output directory for video CSVs and manifest.csv"),
    videos: int = typer.Option(60, "--videos", min=1, help="Number of videos"),
    frames: int = typer.Option(300, "--frames", min=1, help="Frames per video"),
    seed: int = typer.Option(0, "--seed", min=0, help="Corpus seed"),
    difficulty: Difficulty = typer.Option(Difficulty.EASY, "--difficulty", help="easy or hard"),
):
    """Generate a synthetic landmark corpus."""
    started_at, t0 = datetime.now(UTC), time.perf_counter()
    manifest = generate_corpus(out, videos, frames, seed, difficulty)
    positive = sum(entry.positive_fraction for entry in manifest.response) / max(1, manifest.count)
    typer.echo(f"Generated {manifest.count} {difficulty.value} videos of {frames} frames in {out}")
    typer.echo(f"Mean positive frame fraction: {positive:.1%}")
    config = {"videos": videos, "frames": frames, "difficulty": difficulty.value}
    _record("synth", started_at, t0, config, {"seed": seed}, [], [out / MANIFEST_NAME])


@app.command()
def prepare(
    data: Path = typer.Option(..., "--data", help="Directory of landmark CSVs"),
    out: Path = typer.Option(Path("split.csv"), "--out", help="Split membership CSV to write"),
    seq_len: int = typer.Option(15, "--seq-len", min=1, help="Frames per window"),
    test: float = typer.Option(0.10, "--test", min=0.0, max=1.0, help="Test fraction"),
    val: float = typer.Option(0.20, "--val", min=0.0, max=1.0, help="Validation fraction of the remaining pool"),
    seed: int = typer.Option(0, "--seed", min=0, help="Split seed"),
    granularity: Granularity = typer.Option(Granularity.WINDOW, "--granularity", help="window or video"),
    standardize: bool = typer.Option(False, "--standardize", help="Z-score each window"),
):
    """Window a corpus, split it and report class balance."""
    started_at, t0 = datetime.now(UTC), time.perf_counter()
    spec = SplitSpec(test_fraction=test, val_fraction=val, seed=seed, granularity=granularity)
    split = split_dataset(_windows(data, seq_len, standardize), spec)
    write_split_csv(split, out)

    typer.echo(f"Split written to {out}")
    for name, part in zip(("train", "val", "test"), split, strict=True):
        _echo_balance(name, part)
    baseline = velocity_baseline_auc(split.test)
    typer.echo(f"Velocity baseline test AUC: {baseline:.4f}" if baseline is not None else "Velocity baseline: n/a")
    config = {"seq_len": seq_len, "standardize": standardize, **spec.model_dump(mode="json")}
    _record("prepare", started_at, t0, config, {"split_seed": seed}, [data], [out])


@app.command("train")
def train_command(
    model: ModelKind = typer.Option(..., "--model", help="Architecture: lstm, gru or cnn1d"),
    data: Path = typer.Option(..., "--data", help="Directory of landmark CSVs"),
    out: Path = typer.Option(..., "--out", help="Checkpoint path"),
    metrics: Path | None = typer.Option(None, "--metrics", help="Per-epoch metrics CSV"),
    split_file: Path | None = typer.Option(None, "--split", help="Split CSV from 'prepare'"),
    epochs: int = typer.Option(10, "--epochs", min=1),
    seed: int = typer.Option(0, "--seed", min=0, help="Seed for initialisation, shuffling, dropout and split"),
    batch_size: int = typer.Option(32, "--batch-size", min=1),
    lr: float = typer.Option(1e-3, "--lr", min=0.0),
    optimizer: OptimizerKind = typer.Option(OptimizerKind.ADAM, "--optimizer"),
    hidden: int = typer.Option(50, "--hidden", min=1),
    layers: int = typer.Option(2, "--layers", min=1),
    kernel: int = typer.Option(3, "--kernel", min=1),
    dropout: float = typer.Option(0.5, "--dropout", min=0.0, max=0.99),
    seq_len: int = typer.Option(15, "--seq-len", min=1),
    test: float = typer.Option(0.10, "--test", min=0.0, max=1.0),
    val: float = typer.Option(0.20, "--val", min=0.0, max=1.0),
    granularity: Granularity = typer.Option(Granularity.WINDOW, "--granularity"),
    standardize: bool = typer.Option(False, "--standardize", help="Z-score each window"),
):
    """Train a model and save the best-validation-AUC checkpoint."""
    started_at, t0 = datetime.now(UTC), time.perf_counter()
    model_config = ModelConfig(
        kind=model, hidden=hidden, layers=layers, kernel=kernel, dropout_p=dropout, seq_len=seq_len
    )
    train_config = TrainConfig(
        epochs=epochs, batch_size=batch_size, learning_rate=lr, optimizer=optimizer, seed=seed
    )
    spec = SplitSpec(test_fraction=test, val_fraction=val, seed=seed, granularity=granularity)
    split = _split(data, split_file, seq_len, spec, standardize)

    typer.echo(f"Training {model_config.summary} ({count_params(model_config):,} parameters)")
    result = train(split, model_config, train_config, on_epoch=lambda record: typer.echo(f"  {record.summary}"))
    save_checkpoint(result.checkpoint, out)
    outputs = [out]
    if metrics is not None:
        write_metrics_csv(result.history, metrics)
        outputs.append(metrics)
    typer.echo(
        f"Best epoch {result.checkpoint.epoch}: val AUC {result.checkpoint.best_val_auc:.4f}; checkpoint saved to {out}"
    )
    config = {
        "model": model_config.model_dump(mode="json", exclude={"summary"}),
        "train": train_config.model_dump(mode="json"),
        "split": spec.model_dump(mode="json"),
        "split_file": str(split_file) if split_file else None,
        "standardize": standardize,
    }
    inputs = [data] + ([split_file] if split_file else [])
    _record("train", started_at, t0, config, {"seed": seed}, inputs, outputs)


@app.command("eval")
def eval_command(
    models: list[Path] = typer.Option(..., "--model", help="Checkpoint path; repeat to compare models"),
    data: Path = typer.Option(..., "--data", help="Directory of landmark CSVs"),
    split_file: Path | None = typer.Option(None, "--split", help="Split CSV from 'prepare'"),
    seed: int = typer.Option(0, "--seed", min=0, help="Split seed when no --split is given"),
    test: float = typer.Option(0.10, "--test", min=0.0, max=1.0),
    val: float = typer.Option(0.20, "--val", min=0.0, max=1.0),
    granularity: Granularity = typer.Option(Granularity.WINDOW, "--granularity"),
    standardize: bool = typer.Option(False, "--standardize", help="Z-score each window"),
    out: Path | None = typer.Option(None, "--out", help="CSV of the evaluation rows"),
):
    """Evaluate checkpoints on the test partition."""
    started_at, t0 = datetime.now(UTC), time.perf_counter()
    spec = SplitSpec(test_fraction=test, val_fraction=val, seed=seed, granularity=granularity)
    splits: dict[int, DatasetSplit] = {}
    reports = []
    for path in models:
        checkpoint = load_checkpoint(path)
        seq_len = checkpoint.config.seq_len
        if seq_len not in splits:
            splits[seq_len] = _split(data, split_file, seq_len, spec, standardize)
        reports.append(evaluate(checkpoint, splits[seq_len].test))

    typer.echo("PERFORMANCE OF THE MODELS ON THE TEST DATASET")
    typer.echo(f"{'Model':<8}{'Accuracy':>12}{'AUC':>12}{'Inference time':>18}")
    for report in reports:
        auc = f"{report.auc * 100:.2f}%" if report.auc is not None else "n/a"
        typer.echo(
            f"{report.kind.value.upper():<8}{report.accuracy * 100:>11.2f}%{auc:>12}"
            f"{report.mean_inference_ms:>15.3f} ms"
        )
    if out is not None:
        rows = [report.model_dump(mode="json", exclude={"summary"}) for report in reports]
        pd.DataFrame(rows).to_csv(out, index=False, lineterminator="\n")
        config = {"split": spec.model_dump(mode="json"), "standardize": standardize}
        _record("eval", started_at, t0, config, {"split_seed": seed}, [*models, data], [out])


@app.command()
def infer(
    model: Path = typer.Option(..., "--model", help="Checkpoint path"),
    input_csv: Path = typer.Option(..., "--input", help="Landmark CSV to replay"),
    out: Path = typer.Option(..., "--out", help="Prediction CSV to write"),
    threshold: float = typer.Option(0.5, "--threshold", min=0.0, max=1.0),
    standardize: bool = typer.Option(False, "--standardize", help="Z-score each window"),
):
    """Stream a landmark CSV through a checkpoint frame by frame."""
    started_at, t0 = datetime.now(UTC), time.perf_counter()
    checkpoint = load_checkpoint(model)
    predictions = replay_video(checkpoint, input_csv, threshold, standardize)
    write_predictions_csv(predictions, out)
    flagged = sum(p.label_predicted for p in predictions.response)
    typer.echo(f"{predictions.summary} emitted ({flagged} predicted crossing) -> {out}")
    config = {"threshold": threshold, "standardize": standardize}
    _record("infer", started_at, t0, config, {}, [model, input_csv], [out])


@app.command()
def bench(
    model: Path | None = typer.Option(None, "--model", help="Checkpoint to benchmark"),
    kind: ModelKind | None = typer.Option(None, "--kind", help="Benchmark a freshly initialised model instead"),
    reps: int = typer.Option(DEFAULT_REPS, "--reps", min=100, help="Timed forward passes"),
    seed: int = typer.Option(0, "--seed", min=0),
    batch_size: int = typer.Option(1, "--batch-size", min=1, help="Windows per forward pass"),
):
    """Measure forward-pass latency."""
    if model is not None and kind is not None:
        raise ConflictingFlagsError("give only one of them", param_hint="'--model' / '--kind'")
    if model is None and kind is None:
        raise MissingFlagError("one of them is required", param_hint="'--model' / '--kind'")
    subject: Checkpoint | ModelParameters
    if model is not None:
        subject = load_checkpoint(model)
    else:
        assert kind is not None
        subject = init_params(ModelConfig(kind=kind), seed)
    report = bench_latency(subject, reps, seed, batch_size)
    typer.echo(report.summary)
    budget = "within" if report.fits_budget else "over"
    typer.echo(f"p99 is {budget} the {report.frame_budget_ms:.1f} ms budget of a 30 FPS stream")


@app.command()
def summary(
    model: ModelKind = typer.Option(..., "--model", help="Architecture: lstm, gru or cnn1d"),
    batch_size: int = typer.Option(32, "--batch-size", min=1),
    hidden: int = typer.Option(50, "--hidden", min=1),
    layers: int = typer.Option(2, "--layers", min=1),
    kernel: int = typer.Option(3, "--kernel", min=1),
    seq_len: int = typer.Option(15, "--seq-len", min=1),
):
    """Print the layer table of an architecture."""
    config = ModelConfig(kind=model, hidden=hidden, layers=layers, kernel=kernel, seq_len=seq_len)
    typer.echo(model_summary(config, batch_size).render())


@app.command()
def validate():
    """Validate environment configuration."""
    typer.echo("Validating intentseq configuration...")

    validation = validate_environment()

    if validation["errors"]:
        typer.echo("\n❌ Configuration Errors:", err=True)
        for error in validation["errors"]:
            typer.echo(f"  - {error}", err=True)

    if validation["warnings"]:
        typer.echo("\n⚠️  Configuration Warnings:")
        for warning in validation["warnings"]:
            typer.echo(f"  - {warning}")

    settings = validation["settings"]
    typer.echo("\n🔧 Settings:")
    typer.echo(f"  - worker threads: {settings['threads']}")
    typer.echo(f"  - log level: {settings['log_level']}")

    if validation["valid"]:
        typer.echo("\n✅ Configuration is valid")
    else:
        typer.echo("\n❌ Configuration is invalid")
        raise typer.Exit(1)


@app.command()
def info():
    """Show tool information and model defaults."""
    typer.echo("intentseq Information")
    typer.echo("=" * 35)
    typer.echo()
    typer.echo(f"Version: {__version__}")
    typer.echo("Input: 33 pose landmarks per frame, (x, y) only = 66 coordinates")
    typer.echo("Window: 15 frames, predicting the 16th")
    typer.echo()
    typer.echo("Architectures (default sizes):")
    for kind in ModelKind:
        typer.echo(f"  - {kind.value:<6} {count_params(ModelConfig(kind=kind)):>7,} parameters")
    typer.echo()
    typer.echo("Commands: synth, prepare, train, eval, infer, bench, summary, validate")


def describe_validation_error(error: ValidationError) -> str:
    """One ``Invalid value for '--flag': reason`` line per rejected field."""
    lines: list[str] = []
    for item in error.errors():
        field = str(item["loc"][-1]) if item["loc"] else ""
        if not field:
            lines.append(f"Invalid options: {item['msg']}")
            continue
        flag = FLAG_NAMES.get(field, f"--{field.replace('_', '-')}")
        lines.append(f"Invalid value for '{flag}': {item['msg']} (got {item.get('input')!r})")
    return "\n".join(lines)


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI in-process.

    Returns:
        0 on success, 1 on a usage error, 2 on a runtime error
    """
    command = typer.main.get_command(app)
    args = list(argv) if argv is not None else sys.argv[1:]
    try:
        result = command.main(args=args, prog_name="intentseq", standalone_mode=False)
    except UsageError as e:
        cast(Any, e).show()
        return 1
    except ValidationError as e:
        typer.echo(f"Error: {describe_validation_error(e)}", err=True)
        return 1
    except typer.Abort:
        typer.echo("Aborted", err=True)
        return 1
    except (IntentSeqError, OSError, ValueError) as e:
        typer.echo(f"Error: {format_error(e)}", err=True)
        return 2
    return result if isinstance(result, int) else 0


def main():
    """Main entry point for the intentseq command."""
    sys.exit(run())


if __name__ == "__main__":
    main()
