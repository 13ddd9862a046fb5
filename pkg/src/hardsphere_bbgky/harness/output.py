import csv
import io
import json
import logging
import os
import platform
import tempfile
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..functionals.sampling import MCEstimate
from ..utils.geometry import format_float


logger = logging.getLogger(__name__)


CSV_COLUMNS = ["s", "t", "point_id", "method", "value", "stderr", "n_samples", "seed"]
DEPENDENCIES = ("numpy", "scipy")


@dataclass
class ResultRow:
    s: int
    t: float
    point_id: str
    method: str
    value: float
    stderr: float = 0.0
    n_samples: int = 0
    seed: int = 0

    @classmethod
    def from_estimate(cls, s: int, t: float, point_id: str, method: str, estimate: MCEstimate) -> "ResultRow":
        return cls(s, t, point_id, method, estimate.value, estimate.stderr, estimate.n_samples, estimate.seed)

    def cells(self) -> List[str]:
        return [
            str(self.s),
            format_float(self.t),
            self.point_id,
            self.method,
            format_float(self.value),
            format_float(self.stderr),
            str(self.n_samples),
            str(self.seed),
        ]


def atomic_write(path: Path, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: Path, rows: Sequence[ResultRow]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    atomic_write(path, buffer.getvalue())
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def versions() -> Dict[str, str]:
    from .. import __version__

    found = {"hardsphere_bbgky": __version__, "python": platform.python_version()}
    for name in DEPENDENCIES:
        try:
            found[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            found[name] = "unknown"
    return found


def write_manifest(
    path: Path,
    command: str,
    config: Dict[str, Any],
    exit_code: int,
    timings: Dict[str, float],
    report: Optional[Dict[str, Any]] = None,
) -> Path:
    manifest = {
        "command": command,
        "exit_code": exit_code,
        "passed": exit_code == 0,
        "config": config,
        "versions": versions(),
        "timings": timings,
        "report": report or {},
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    logger.info(f"Wrote manifest {path}")
    return path
