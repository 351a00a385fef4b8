"""Collected bifurcation results with JSON, CSV and gnuplot exports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..io.tables import write_csv, write_gnuplot
from .codim2 import Codim2Curve
from .cycles import CycleBranch
from .equilibria import BifurcationPoint, Branch, SweepResult, label_points


@dataclass
class BifurcationAtlas:
    """Branches, cycle branches, two-parameter curves and detected points."""

    ranges: dict = field(default_factory=dict)
    branches: list = field(default_factory=list)
    cycles: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    points: list = field(default_factory=list)

    @classmethod
    def from_sweep(cls, sweep: SweepResult, lo: float, hi: float) -> "BifurcationAtlas":
        return cls({sweep.param: [float(lo), float(hi)]}, list(sweep.branches), [], [], list(sweep.points))

    def add_cycles(self, branch: CycleBranch) -> None:
        self.cycles.append(branch)
        self.points.extend(branch.points)

    def add_curve(self, curve: Codim2Curve) -> None:
        self.curves.append(curve)
        self.points.extend(curve.points)

    def relabel(self) -> None:
        label_points(self.points)

    def of_kind(self, kind: str) -> list[BifurcationPoint]:
        return [p for p in self.points if p.kind == kind]

    def to_dict(self) -> dict:
        return {
            "ranges": self.ranges,
            "points": [p.to_dict() for p in self.points],
            "branches": [
                {"param": b.param, "n_points": int(len(b.values)), "stop_reason": b.stop_reason,
                 "range": [float(np.min(b.values)), float(np.max(b.values))]}
                for b in self.branches
            ],
            "cycles": [
                {"param": c.param, "n_points": int(len(c.values)), "stop_reason": c.stop_reason} for c in self.cycles
            ],
            "curves": [
                {"kind": c.kind, "params": list(c.params), "n_points": int(len(c.values)),
                 "stop_reasons": list(c.stop_reasons)}
                for c in self.curves
            ],
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    def write_tables(self, out_dir, gnuplot: bool = True) -> list[Path]:
        """One CSV per branch, cycle branch and curve; gnuplot files split by stability."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for k, b in enumerate(self.branches, 1):
            head, rows = branch_rows(b)
            written.append(write_csv(out_dir / f"branch_{k}.csv", head, rows))
            if gnuplot:
                written.append(write_gnuplot(out_dir / f"branch_{k}.dat", head, _split(rows, [r[-2] for r in rows])))
        for k, c in enumerate(self.cycles, 1):
            head, rows = c.to_rows()
            written.append(write_csv(out_dir / f"cycles_{k}.csv", head, rows))
            if gnuplot:
                written.append(write_gnuplot(out_dir / f"cycles_{k}.dat", head[:-1], [[r[:-1] for r in rows]]))
        for k, c in enumerate(self.curves, 1):
            head, rows = c.to_rows()
            written.append(write_csv(out_dir / f"curve_{k}_{c.kind}.csv", head, rows))
            if gnuplot:
                written.append(write_gnuplot(out_dir / f"curve_{k}_{c.kind}.dat", head, [rows]))
        if self.points:
            names = sorted({k for p in self.points for k in p.params})
            head = ["label", "kind", *names]
            rows = [[p.label, p.kind, *(p.params.get(n, float("nan")) for n in names)] for p in self.points]
            written.append(write_csv(out_dir / "points.csv", head, rows))
        return written


def branch_rows(b: Branch):
    n = b.states.shape[1]
    head = [b.param, *(f"x{i + 1}" for i in range(n)), "stable", "admissible"]
    stable = b.stable
    rows = [
        [float(v), *map(float, s), int(st), int(a)] for v, s, st, a in zip(b.values, b.states, stable, b.admissible)
    ]
    return head, rows


def _split(rows, keys):
    """Split rows into blocks where ``keys`` changes, repeating the boundary point."""
    blocks, cur = [], []
    prev = None
    for r, k in zip(rows, keys):
        if prev is not None and k != prev and cur:
            blocks.append(cur)
            cur = [cur[-1]]
        cur.append(r)
        prev = k
    if cur:
        blocks.append(cur)
    return blocks
