"""CSV metric sink: header first, one flushed row per write."""
from __future__ import annotations

import csv
import math
from pathlib import Path


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


class CsvWriter:
    """Append rows with a fixed column set.  Unknown keys are rejected and
    missing ones are written empty."""

    def __init__(self, path: str | Path, columns: list[str]):
        self.columns = list(columns)
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.columns)
        self._fh.flush()

    def write(self, row: dict) -> None:
        extra = set(row) - set(self.columns)
        if extra:
            raise KeyError(f"unknown metric columns {sorted(extra)}")
        self._w.writerow([_fmt(row.get(c, "")) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
