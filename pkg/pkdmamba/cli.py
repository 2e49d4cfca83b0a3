from __future__ import annotations

import functools
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
from dotenv import load_dotenv

from . import __version__
from .config import RunConfig, config_hash, get_settings, load_config, load_splits
from .data import Dataset
from .distill import Ensemble, RunStore, ensemble_accuracy, prefix_accuracies, run_pkd, train_teacher
from .errors import CheckpointError, ConfigError, PkdError
from .extensions import configure_logging
from .metrics import (
    FLOPS_CONVENTION,
    accuracy,
    cost_report,
    emit_report,
    flops_estimate,
    write_csv,
    write_eval,
    write_round_log,
)
from .metrics.reporting import LADDER_COLUMNS
from .models import (
    CIFAR_LADDER,
    CIFAR_TEACHER,
    MNIST_LADDER,
    MNIST_TEACHER,
    MambaModel,
    load_model,
    predict_logits,
    reference_by_dataset,
    save_model,
)

logger = logging.getLogger(__name__)

TEACHER_FILE = "teacher.mpkd"


def _exit_on_error(fn):
    """Map library errors onto exit codes: 2 for invalid configs or checkpoints, 1 otherwise."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, CheckpointError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (PkdError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _common(fn):
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                      help="Output directory (overrides the config).")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (overrides the config).")(fn)
    fn = click.option("--config", "config_source", default="synthetic", show_default=True,
                      help="TOML file or preset name (synthetic, mnist-desk, mnist, cifar10).")(fn)
    return fn


def _resolve(config_source: str, seed: int | None, out_dir: str | None) -> tuple[RunConfig, Path]:
    """Load the config; without --out its out_dir is taken relative to PKD_OUTPUT_DIR."""
    cfg = load_config(config_source, seed=seed, out_dir=out_dir)
    if out_dir is None:
        cfg = replace(cfg, out_dir=str(Path(get_settings().OUTPUT_DIR) / cfg.out_dir))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _write_manifest(out: Path, command: str, cfg: RunConfig) -> None:
    path = out / "manifest.json"
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            logger.warning("replacing unreadable manifest %s", path)
    manifest[command] = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "flops_convention": FLOPS_CONVENTION,
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_teacher(cfg: RunConfig, path: Path) -> MambaModel:
    teacher = load_model(path, cfg.train.dtype)
    channels, height, width, n_classes = cfg.dataset.shape
    found = (teacher.cfg.channels, teacher.cfg.height, teacher.cfg.width, teacher.cfg.n_classes)
    if found != (channels, height, width, n_classes):
        raise CheckpointError(
            f"teacher {path} expects channels/height/width/classes {found}, "
            f"dataset {cfg.dataset.name} provides {(channels, height, width, n_classes)}"
        )
    return teacher


def _reference(cfg: RunConfig):
    if cfg.teacher == MNIST_TEACHER and cfg.ladder == MNIST_LADDER:
        return reference_by_dataset["mnist"]
    if cfg.teacher == CIFAR_TEACHER and cfg.ladder == CIFAR_LADDER:
        return reference_by_dataset["cifar10"]
    return None


def _write_reports(cfg: RunConfig, out: Path, teacher: MambaModel, store: RunStore, test: Dataset) -> int:
    records = store.load_records()
    rows = [row for record in records for row in record["rows"]] + store.load_tail()
    write_round_log(rows, out / "round_log.csv")
    teacher_flops = flops_estimate(teacher.cfg)
    teacher_report = cost_report("teacher", teacher, accuracy(predict_logits(teacher, test.images), test.labels),
                                 teacher_flops)
    if not records:
        click.echo("no student was accepted; ladder.csv and prefix.csv not written")
        return 0
    ensemble = Ensemble([store.load_student(r["round"], cfg.train.dtype) for r in records], teacher)
    prefix = prefix_accuracies(ensemble, test.images, test.labels)
    students = [
        cost_report(student.cfg.label, student, accuracy(predict_logits(student, test.images), test.labels),
                    teacher_flops)
        for student in ensemble.students
    ]
    emit_report(students, teacher_report, out, prefix, reference=_reference(cfg))
    return len(records)


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from PKD_LOG_LEVEL).")
@click.version_option(__version__, prog_name="pkdmamba")
@_exit_on_error
def cli(log_level: str | None) -> None:
    """Mamba classifiers and progressive knowledge distillation."""
    load_dotenv()
    settings = get_settings()
    configure_logging(log_level or settings.LOG_LEVEL)


@cli.command("train-teacher")
@_common
@_exit_on_error
def train_teacher_cmd(config_source: str, seed: int | None, out_dir: str | None) -> None:
    """Train the teacher with cross-entropy and early stopping."""
    cfg, out = _resolve(config_source, seed, out_dir)
    train, test = load_splits(cfg.dataset, cfg.seed)
    click.echo(f"training teacher on {len(train)} examples ({cfg.dataset.name})")
    teacher, result = train_teacher(cfg.teacher, train, cfg.train, cfg.seed)
    save_model(teacher, out / TEACHER_FILE)
    acc = accuracy(predict_logits(teacher, test.images), test.labels)
    report = cost_report("teacher", teacher, acc, flops_estimate(teacher.cfg))
    write_csv(out / "teacher.csv", LADDER_COLUMNS[:5], [{
        "model": report.name,
        "params": report.params,
        "flops": report.flops,
        "flops_fraction": report.flops_fraction,
        "accuracy": report.accuracy,
    }])
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "train-teacher", cfg)
    click.echo(f"teacher: {report.params} params, {report.flops} FLOPs, "
               f"test accuracy {acc:.4f} after {result.epochs_trained} epochs")


@cli.command("distill")
@_common
@click.option("--teacher", "teacher_path", type=click.Path(dir_okay=False), default=None,
              help=f"Teacher checkpoint (default <out>/{TEACHER_FILE}).")
@_exit_on_error
def distill_cmd(config_source: str, seed: int | None, out_dir: str | None, teacher_path: str | None) -> None:
    """Grow the student ensemble; resumes an interrupted run in the same output directory."""
    cfg, out = _resolve(config_source, seed, out_dir)
    teacher = _load_teacher(cfg, Path(teacher_path) if teacher_path else out / TEACHER_FILE)
    train, test = load_splits(cfg.dataset, cfg.seed)
    store = RunStore(out, config_hash(cfg))
    result = run_pkd(teacher, cfg.ladder, train, cfg.hyper, cfg.train, cfg.seed, eval_data=test, store=store)
    accepted = _write_reports(cfg, out, teacher, store, test)
    _write_manifest(out, "distill", cfg)
    final = ensemble_accuracy(result.ensemble, test.images, test.labels, test.n_classes)
    click.echo(f"{accepted} weak learner(s) accepted; ensemble test accuracy {final:.4f}")


@cli.command("eval")
@_common
@click.option("--teacher", "teacher_path", type=click.Path(dir_okay=False), default=None,
              help=f"Teacher checkpoint (default <out>/{TEACHER_FILE}).")
@click.option("--prefix", "prefix_t", type=click.IntRange(min=1), default=None,
              help="Evaluate prefix ensembles up to this size (default: all).")
@_exit_on_error
def eval_cmd(config_source: str, seed: int | None, out_dir: str | None, teacher_path: str | None,
             prefix_t: int | None) -> None:
    """Accuracy of the teacher, every student and each prefix ensemble on the test split."""
    cfg, out = _resolve(config_source, seed, out_dir)
    teacher = _load_teacher(cfg, Path(teacher_path) if teacher_path else out / TEACHER_FILE)
    _, test = load_splits(cfg.dataset, cfg.seed)
    store = RunStore(out, config_hash(cfg))
    records = store.load_records()
    if prefix_t is not None and prefix_t > len(records):
        raise click.BadParameter(f"only {len(records)} student(s) stored", param_hint="--prefix")
    limit = len(records) if prefix_t is None else prefix_t
    students = [store.load_student(r["round"], cfg.train.dtype) for r in records[:limit]]
    teacher_flops = flops_estimate(teacher.cfg)

    rows = [{"model": "teacher", "accuracy": accuracy(predict_logits(teacher, test.images), test.labels),
             "flops_fraction": 1.0}]
    for student in students:
        rows.append({
            "model": student.cfg.label,
            "accuracy": accuracy(predict_logits(student, test.images), test.labels),
            "flops_fraction": flops_estimate(student.cfg) / teacher_flops,
        })
    cumulative = 0
    for t, acc in enumerate(prefix_accuracies(Ensemble(students, teacher), test.images, test.labels), start=1):
        cumulative += flops_estimate(students[t - 1].cfg)
        rows.append({"model": f"prefix-{t}", "accuracy": acc, "flops_fraction": cumulative / teacher_flops})
    write_eval(rows, out / "eval.csv")
    _write_manifest(out, "eval", cfg)
    for row in rows:
        click.echo(f"{row['model']:>12}  accuracy {row['accuracy']:.4f}  flops fraction {row['flops_fraction']:.4f}")


@cli.command("report")
@_common
@click.option("--teacher", "teacher_path", type=click.Path(dir_okay=False), default=None,
              help=f"Teacher checkpoint (default <out>/{TEACHER_FILE}).")
@_exit_on_error
def report_cmd(config_source: str, seed: int | None, out_dir: str | None, teacher_path: str | None) -> None:
    """Regenerate ladder.csv, prefix.csv and round_log.csv from a run directory."""
    cfg, out = _resolve(config_source, seed, out_dir)
    teacher = _load_teacher(cfg, Path(teacher_path) if teacher_path else out / TEACHER_FILE)
    _, test = load_splits(cfg.dataset, cfg.seed)
    accepted = _write_reports(cfg, out, teacher, RunStore(out, config_hash(cfg)), test)
    _write_manifest(out, "report", cfg)
    click.echo(f"reports for {accepted} student(s) written to {out}")


def main() -> None:
    cli(prog_name="pkdmamba")
