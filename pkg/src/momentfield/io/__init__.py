from .manifest import MANIFEST_NAME, RunManifest, sha256
from .tables import read_csv, write_csv, write_gnuplot

__all__ = ["MANIFEST_NAME", "RunManifest", "read_csv", "sha256", "write_csv", "write_gnuplot"]
