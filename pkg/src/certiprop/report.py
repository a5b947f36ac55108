"""Bound reports and their JSON / CSV serialization.

Serialized outputs are byte-deterministic for a fixed flag set: wall time is
kept in memory but only written to files when timing is explicitly requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .intervals import IntervalVector

VERSION = "0.1.0"

METHOD_IBP = "IBP"
METHOD_AA = "AA"
METHOD_DA = "DA"
METHOD_LB = "LB"
METHOD_EXACT = "EXACT"


@dataclass
class BoundReport:
    """Per-output-coordinate certified (or sampled) bounds."""

    method: str
    box: IntervalVector
    wall_time: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def widths(self) -> np.ndarray:
        return self.box.widths()

    @property
    def max_width(self) -> float:
        return self.box.max_width()

    def to_dict(self, with_timing: bool = False) -> dict:
        doc = {
            "certiprop": VERSION,
            "method": self.method,
            "metadata": {k: self.metadata[k] for k in sorted(self.metadata)},
            "lo": [float(v) for v in self.box.lo],
            "hi": [float(v) for v in self.box.hi],
            "widths": [float(v) for v in self.widths],
            "max_width": float(self.max_width),
        }
        if with_timing:
            doc["wall_time_s"] = float(self.wall_time)
        return doc

    def to_json(self, with_timing: bool = False) -> str:
        return json.dumps(self.to_dict(with_timing), indent=1) + "\n"

    def csv_rows(self, with_timing: bool = False) -> list:
        rows = []
        for i in range(self.box.dim):
            rows.append([self.method.lower(), str(i),
                         repr(float(self.box.lo[i])), repr(float(self.box.hi[i])),
                         repr(float(self.widths[i]))])
        rows.append([self.method.lower(), "total", "", "", repr(float(self.max_width))])
        if with_timing:
            rows.append([self.method.lower(), "time", "", "", repr(float(self.wall_time))])
        return rows


def metadata_comment(metadata: dict) -> str:
    parts = [f"certiprop={VERSION}"]
    parts += [f"{k}={metadata[k]}" for k in sorted(metadata)]
    return "# " + " ".join(parts)


def write_report(report: BoundReport, path, with_timing: bool = False) -> None:
    """Write a report; .csv suffix selects CSV, anything else JSON."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lines = [metadata_comment(report.metadata), "method,coord,lo,hi,width"]
        lines += [",".join(r) for r in report.csv_rows(with_timing)]
        path.write_text("\n".join(lines) + "\n")
    else:
        path.write_text(report.to_json(with_timing))


def write_multi_report(reports: list, path, metadata: dict,
                       checks: list | None = None,
                       with_timing: bool = False) -> None:
    """One CSV with several methods plus optional containment-check rows."""
    path = Path(path)
    lines = [metadata_comment(metadata), "method,coord,lo,hi,width"]
    for rep in reports:
        lines += [",".join(r) for r in rep.csv_rows(with_timing)]
    for name, value in (checks or []):
        lines.append(f"check,{name},,,{int(value)}")
    path.write_text("\n".join(lines) + "\n")
