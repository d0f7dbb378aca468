"""Headerless CSV matrices, spectrum files and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .covmodel import ScaleSepError
from .spectra import Spectrum

FMT = "%.17g"


class ParseError(ScaleSepError):
    def __init__(self, path, line, column, message):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.line, self.column = line, column


def load_matrix(path, allow_empty: bool = False) -> np.ndarray:
    """Read a numeric CSV; every row must have the same number of columns."""
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(path, lineno, col, f"not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise ParseError(path, lineno, col, f"non-finite value {cell!r}")
                vals.append(v)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(path, lineno, len(vals), f"expected {width} columns, found {len(vals)}")
            rows.append(vals)
    if not rows:
        if allow_empty:
            return np.zeros((0, 0))
        raise ParseError(path, 1, 1, "file has no data rows")
    return np.array(rows, dtype=float)


def save_matrix(path, M) -> Path:
    path = Path(path)
    M = np.atleast_2d(np.asarray(M, dtype=float)) if np.size(M) else np.zeros((0, 0))
    with path.open("w", newline="") as fh:
        if M.size:
            np.savetxt(fh, M, fmt=FMT, delimiter=",")
    return path


def save_spectrum(path, spec: Spectrum) -> Path:
    """First row eigenvalues, then one row per grid point (columns = components)."""
    table = np.vstack([spec.eigenvalues[None, :], spec.eigenvectors])
    return save_matrix(path, table)


def load_spectrum(path) -> tuple[np.ndarray, np.ndarray]:
    table = load_matrix(path)
    return table[0], table[1:]


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_manifest(out_dir, command: str, config: dict, inputs: list, outputs: list,
                   seed=None, results: dict | None = None, started: float | None = None) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): sha256(p) for p in inputs},
        "seed": seed,
        "started": started,
        "finished": time.time(),
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "results": results or {},
    }
    return write_json(out_dir / "manifest.json", manifest)
