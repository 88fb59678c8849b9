"""Deterministic CSV/JSON emission and run manifests."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__


def _fmt(x) -> str:
    return format(float(x), ".17g")


def emit_csv(path, header: Sequence[str], columns: Sequence, name: str = "series") -> Path:
    """Write columns as CSV with 17 significant digits and LF endings.

    Numeric cells must be finite; string cells are written verbatim. Raises
    ``ValueError`` naming ``name``, the column and the row index of the first
    non-finite value.
    """
    path = Path(path)
    cols = [np.asarray(c) if not isinstance(c, (list, tuple)) else list(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError(f"{name}: {len(header)} headers for {len(cols)} columns")
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError(f"{name}: columns differ in length")
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for h, c in zip(header, cols):
            x = c[i]
            if isinstance(x, str):
                cells.append(x)
                continue
            xf = float(x)
            if not math.isfinite(xf):
                raise ValueError(f"{name}: non-finite value {xf} in column {h!r} at index {i}")
            cells.append(_fmt(xf))
        lines.append(",".join(cells))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan; spell them out
        return x if math.isfinite(x) else str(x)
    return obj


def emit_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", newline="\n") as fh:
        fh.write(text + "\n")
    return path


@dataclass
class RunManifest:
    """Record of one CLI run; written last so its presence marks completion."""

    subcommand: str
    config: dict
    files: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    version: str = __version__
    started: float = field(default_factory=time.perf_counter)

    def add(self, path) -> Path:
        p = Path(path)
        self.files.append(str(p))
        return p

    def write(self, path) -> Path:
        path = Path(path)
        body = {
            "subcommand": self.subcommand,
            "code_version": self.version,
            "config": self.config,
            "files": sorted(set(self.files)),
            "results": self.results,
            "wall_time_s": round(time.perf_counter() - self.started, 3),
        }
        return emit_json(body, path)
