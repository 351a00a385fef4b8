"""Plain-text tables: CSV and gnuplot column files with round-trip float formatting."""

from __future__ import annotations

from pathlib import Path


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path, head, rows) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(head) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")
    return path


def write_gnuplot(path, head, blocks) -> Path:
    """Whitespace-separated columns; ``blocks`` are row lists separated by blank lines."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# " + " ".join(head) + "\n")
        for k, rows in enumerate(blocks):
            if k:
                fh.write("\n\n")
            for r in rows:
                fh.write(" ".join(fmt(v) for v in r) + "\n")
    return path


def read_csv(path):
    """``(header, rows)`` with numeric fields converted to float."""
    with open(path) as fh:
        head = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            vals = []
            for x in line.strip().split(","):
                try:
                    vals.append(float(x))
                except ValueError:
                    vals.append(x)
            rows.append(vals)
    return head, rows
