"""Reconstruction-quality metrics and iteration histories."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "point_to_polyline_distance",
    "directed_hausdorff",
    "hausdorff",
    "HistoryRecord",
    "ReconstructionHistory",
    "write_history",
    "read_history",
    "HISTORY_COLUMNS",
]

HISTORY_COLUMNS = ("k", "J", "G", "J_norm", "hausdorff", "t", "primal_residual")


def _points(poly):
    return np.asarray(getattr(poly, "points", poly), dtype=float)


def point_to_polyline_distance(pts, poly, chunk=2048) -> np.ndarray:
    """Distance from each point to the closed polyline ``poly``.

    Uses orthogonal projection onto every segment, so points near the middle
    of a long segment are measured correctly.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = _points(poly)
    b = np.roll(a, -1, axis=0)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk, None, :]
        w = p - a[None]
        t = np.clip(np.einsum("nij,ij->ni", w, d) / dd, 0.0, 1.0)
        r = w - t[..., None] * d[None]
        out[s : s + chunk] = np.sqrt(np.einsum("nij,nij->ni", r, r).min(axis=1))
    return out


def directed_hausdorff(A, B) -> float:
    """sup over vertices of A of the distance to the polyline B."""
    return float(point_to_polyline_distance(_points(A), _points(B)).max())


def hausdorff(A, B) -> float:
    """Symmetric Hausdorff distance between two closed polylines."""
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


@dataclass
class HistoryRecord:
    k: int
    J: float
    G: float
    J_norm: float
    hausdorff: float
    t: float
    primal_residual: float

    def row(self):
        return [str(self.k)] + [
            _fmt(getattr(self, c)) for c in HISTORY_COLUMNS[1:]
        ]


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


@dataclass
class ReconstructionHistory:
    """Per-iteration records plus the configuration that produced them."""

    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    status: str = "running"
    message: str = ""

    def append(self, record: HistoryRecord):
        if self.records and record.k <= self.records[-1].k:
            raise ValueError("history iterations must strictly increase")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def final(self) -> HistoryRecord:
        return self.records[-1]


def write_history(history, path):
    records = history.records if isinstance(history, ReconstructionHistory) else history
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


def read_history(path) -> ReconstructionHistory:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HISTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected history header {header}")
        hist = ReconstructionHistory(status="loaded")
        for row in reader:
            vals = [float(x) for x in row[1:]]
            hist.append(HistoryRecord(int(row[0]), *vals))
    return hist
