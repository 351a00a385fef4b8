"""Run manifests: what was run, with which inputs, producing which files."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _clean(obj):
    """JSON-safe copy with floats kept at full precision."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


@dataclass
class RunManifest:
    command: str
    config: dict
    args: dict
    seeds: list = field(default_factory=list)
    version: str = ""
    started: float = field(default_factory=time.time)
    wall_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)

    def add_output(self, path) -> None:
        path = Path(path)
        self.outputs[path.name] = sha256(path)

    def write(self, out_dir) -> Path:
        """Write ``manifest.json`` into ``out_dir`` (replacing any previous one)."""
        out_dir = Path(out_dir)
        self.wall_seconds = time.time() - self.started
        p = out_dir / MANIFEST_NAME
        p.write_text(json.dumps(_clean(asdict(self)), indent=2, sort_keys=True) + "\n")
        return p

    @classmethod
    def read(cls, out_dir) -> "RunManifest":
        d = json.loads((Path(out_dir) / MANIFEST_NAME).read_text())
        return cls(**d)

    def verify(self, out_dir) -> dict[str, bool]:
        """Whether each recorded output still matches its digest."""
        out_dir = Path(out_dir)
        return {name: (out_dir / name).exists() and sha256(out_dir / name) == dg for name, dg in self.outputs.items()}
