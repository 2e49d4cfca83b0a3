from __future__ import annotations

import csv
import logging
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import UsageError
from ..models import ReferenceResult
from .costs import CostReport

logger = logging.getLogger(__name__)

LADDER_COLUMNS = ["model", "params", "flops", "flops_fraction", "accuracy",
                  "reference_accuracy", "reference_flops_fraction"]
PREFIX_COLUMNS = ["t", "accuracy", "cumulative_flops_fraction", "parallel_flops_fraction"]
ROUND_LOG_COLUMNS = ["round", "rung", "epochs_trained", "weak_learner", "min_margin", "student_accuracy",
                     "prefix_ensemble_accuracy", "params", "flops", "flops_fraction_of_teacher"]
EVAL_COLUMNS = ["model", "accuracy", "flops_fraction"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_csv(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(col)) for col in columns])
    logger.info("wrote %s", path)
    return path


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _reference_fractions(reference: Mapping[str, ReferenceResult] | None):
    if not reference or "teacher" not in reference:
        return {}
    teacher_flops = reference["teacher"].flops
    return {name: (ref.accuracy, ref.flops / teacher_flops) for name, ref in reference.items()}


def emit_report(
    students: Sequence[CostReport],
    teacher: CostReport,
    out_dir: str | os.PathLike,
    prefix_accuracies: Sequence[float] | None = None,
    reference: Mapping[str, ReferenceResult] | None = None,
) -> tuple[Path, Path]:
    """Write ladder.csv (students plus teacher, by FLOPs) and prefix.csv (one row per prefix size)."""
    if not students:
        raise UsageError("emit_report needs at least one student")
    out_dir = Path(out_dir)
    refs = _reference_fractions(reference)

    def ladder_row(report: CostReport) -> dict:
        ref_acc, ref_frac = refs.get(report.name, (None, None))
        return {
            "model": report.name,
            "params": report.params,
            "flops": report.flops,
            "flops_fraction": float(report.flops_fraction),
            "accuracy": float(report.accuracy),
            "reference_accuracy": ref_acc,
            "reference_flops_fraction": ref_frac,
        }

    rows = sorted([*students, teacher], key=lambda r: (r.flops, r.name == "teacher"))
    ladder_path = write_csv(out_dir / "ladder.csv", LADDER_COLUMNS, (ladder_row(r) for r in rows))

    prefix_rows = []
    cumulative = 0
    largest = 0
    for t, report in enumerate(students, start=1):
        cumulative += report.flops
        largest = max(largest, report.flops)
        acc = prefix_accuracies[t - 1] if prefix_accuracies is not None else None
        prefix_rows.append({
            "t": t,
            "accuracy": None if acc is None else float(acc),
            "cumulative_flops_fraction": cumulative / teacher.flops,
            "parallel_flops_fraction": largest / teacher.flops,
        })
    prefix_path = write_csv(out_dir / "prefix.csv", PREFIX_COLUMNS, prefix_rows)
    return ladder_path, prefix_path


def write_round_log(rows: Iterable[Mapping], path: str | os.PathLike) -> Path:
    return write_csv(path, ROUND_LOG_COLUMNS, rows)


def write_eval(rows: Iterable[Mapping], path: str | os.PathLike) -> Path:
    return write_csv(path, EVAL_COLUMNS, rows)
