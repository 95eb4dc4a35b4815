"""Readers for the documented interchange formats.

This package deliberately reads files only: the trace CSV
(``iter,eta,f,f_clean,err_fro,grad_fro,grad_dualp,elapsed_ms``), the run
manifest (JSON), and the text matrix format (``rows cols`` header then one
row per line). It does not import the solver package.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

TRACE_HEADER = ["iter", "eta", "f", "f_clean", "err_fro", "grad_fro", "grad_dualp", "elapsed_ms"]


class FormatError(Exception):
    """A file does not follow its documented format."""


def read_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    for key in ("scenario", "arms"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest missing {key!r}")
    return manifest


def read_trace(path) -> dict[str, np.ndarray]:
    """Columns of one trace CSV; empty cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise FormatError(f"{path}: unexpected columns {header}")
        rows = [[float(c) if c != "" else np.nan for c in row] for row in reader]
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(TRACE_HEADER)))
    return {name: data[:, i] for i, name in enumerate(TRACE_HEADER)}


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        try:
            rows, cols = map(int, fh.readline().split())
        except ValueError as exc:
            raise FormatError(f"{path}: bad matrix header") from exc
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise FormatError(f"{path}: header says {rows}x{cols}, body is {data.shape}")
    return data


def trace_paths(manifest: dict, manifest_path) -> list[tuple[str, Path]]:
    """(arm label, csv path) pairs resolved relative to the manifest."""
    base = Path(manifest_path).parent
    return [(arm["label"], base / arm["csv"]) for arm in manifest["arms"]]
