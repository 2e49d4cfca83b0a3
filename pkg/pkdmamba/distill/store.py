from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..models import MambaModel, load_model, save_model
from .residuals import ResidualMatrices

logger = logging.getLogger(__name__)


class RunStore:
    """On-disk state of a distillation run.

    Layout under ``root``:
        rounds.json                   config hash and one record per accepted round
        students/round-XX.mpkd|.json  student weights and config
        residuals/round-XX-plus.npy   K⁺ after the round's update (K⁻ alongside)
    """

    def __init__(self, root: str | os.PathLike, config_hash: str):
        self.root = Path(root)
        self.config_hash = config_hash
        self.index_path = self.root / "rounds.json"

    def student_path(self, t: int) -> Path:
        return self.root / "students" / f"round-{t:02d}.mpkd"

    def residual_paths(self, t: int) -> tuple[Path, Path]:
        base = self.root / "residuals"
        return base / f"round-{t:02d}-plus.npy", base / f"round-{t:02d}-minus.npy"

    def load_records(self) -> list[dict]:
        if not self.index_path.exists():
            return []
        try:
            index = json.loads(self.index_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt run index {self.index_path}: {exc}") from exc
        if index.get("config_hash") != self.config_hash:
            raise CheckpointError(
                f"run store {self.root} was written for config {index.get('config_hash')}, "
                f"not {self.config_hash}; use a fresh --out directory"
            )
        return index.get("rounds", [])

    def _write_index(self, records: list[dict]) -> None:
        payload = {"config_hash": self.config_hash, "rounds": records}
        self.index_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def save_round(self, record: dict, student: MambaModel, K: ResidualMatrices) -> None:
        t = record["round"]
        self.student_path(t).parent.mkdir(parents=True, exist_ok=True)
        self.residual_paths(t)[0].parent.mkdir(parents=True, exist_ok=True)
        save_model(student, self.student_path(t))
        plus_path, minus_path = self.residual_paths(t)
        np.save(plus_path, K.K_plus)
        np.save(minus_path, K.K_minus)
        records = [r for r in self.load_records() if r["round"] < t]
        records.append(record)
        self._write_index(records)
        logger.info("persisted round %d to %s", t, self.root)

    def save_tail(self, rows: list[dict]) -> None:
        """Rows of attempts after the last accepted round (the failing search, if any)."""
        records = self.load_records()
        self._write_index(records)
        tail = self.root / "tail.json"
        tail.write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def load_tail(self) -> list[dict]:
        tail = self.root / "tail.json"
        if not tail.exists():
            return []
        return json.loads(tail.read_text(encoding="utf-8"))

    def load_student(self, t: int, dtype=None) -> MambaModel:
        return load_model(self.student_path(t), dtype)

    def load_residuals(self, t: int) -> ResidualMatrices:
        plus_path, minus_path = self.residual_paths(t)
        try:
            return ResidualMatrices(np.load(plus_path), np.load(minus_path))
        except FileNotFoundError as exc:
            raise CheckpointError(f"residual matrices for round {t} missing under {self.root}") from exc
