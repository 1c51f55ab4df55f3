"""Check rows, run reports, and atomic artifact writers.

CSV artifacts use RFC-4180 quoting, a header row, `.` decimals and floats with
17 significant digits so that reruns with the same seed are byte-identical.
JSON reports serialize with sorted keys.  All writes go through a temp file in
the target directory followed by an atomic rename.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Sequence


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class CheckRow:
    """One verified identity: stable id, measured value, tolerance, outcome."""

    check_id: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "detail": self.detail,
        }


@dataclass
class Report:
    """Run metadata plus the table of check rows and emitted artifacts."""

    command: str
    config_hash: str
    seed: int
    version: str
    rows: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0
    approximate: bool = False

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "approximate": self.approximate,
            "all_passed": self.all_passed,
            "rows": [r.as_dict() for r in self.rows],
            "artifacts": sorted(self.artifacts),
            "extra": self.extra,
            "timing": {"elapsed_seconds": self.elapsed_seconds},
        }


def _atomic_write(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, lambda fh: fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n"))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def writer(fh):
        out = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt_float(c) if isinstance(c, float) else c for c in row])

    _atomic_write(path, writer)
