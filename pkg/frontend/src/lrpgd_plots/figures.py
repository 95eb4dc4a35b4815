"""Convergence and power-Doppler figures.

Output is deterministic for fixed inputs: the Agg backend is forced, the
SVG hash salt is pinned, and date metadata is stripped.
"""

from __future__ import annotations

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "lrpgd-plots"

import matplotlib.pyplot as plt
import numpy as np

from .io import FormatError, read_manifest, read_matrix, read_trace, trace_paths


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _save(fig, out_base: Path) -> list[Path]:
    written = []
    for ext in ("png", "svg"):
        target = out_base.with_suffix(f".{ext}")
        fig.savefig(target, metadata={"Date": None} if ext == "svg" else None)
        written.append(target)
    plt.close(fig)
    return written


def plot_convergence(manifest_path, out_dir) -> list[Path]:
    """One figure per manifest: error (fallback: loss) vs iteration, log y.

    Arms with an empty trace are skipped with a warning; files with the
    wrong columns are reported per file and skipped likewise.
    """
    manifest = read_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    plotted = 0
    for label, csv_path in trace_paths(manifest, manifest_path):
        try:
            cols = read_trace(csv_path)
        except (OSError, FormatError) as exc:
            _warn(f"{csv_path.name}: {exc}")
            continue
        if cols["iter"].size == 0:
            _warn(f"{csv_path.name}: empty trace, skipped")
            continue
        y = cols["err_fro"]
        if np.isnan(y).all():
            y = cols["f"]
        mask = np.isfinite(y) & (y > 0)  # log scale cannot show zeros
        if not mask.any():
            _warn(f"{csv_path.name}: no positive values to plot, skipped")
            continue
        ax.semilogy(cols["iter"][mask], y[mask], label=label, linewidth=1.4)
        plotted += 1

    ax.set_xlabel("iteration")
    ax.set_ylabel("Frobenius error")
    ax.set_title(manifest["scenario"])
    if plotted:
        ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    return _save(fig, out_dir / f"{manifest['scenario']}__convergence")


def plot_doppler(image_paths, out_path) -> Path:
    """Grayscale panels side by side on a shared dB color scale."""
    panels = [read_matrix(p) for p in image_paths]
    shapes = {p.shape for p in panels}
    if len(shapes) > 1:
        raise FormatError(f"panel shapes differ: {sorted(shapes)}")
    vmin = min(p.min() for p in panels)
    vmax = max(p.max() for p in panels)

    fig, axes = plt.subplots(
        1, len(panels), figsize=(3.2 * len(panels), 3.6), squeeze=False
    )
    image = None
    for ax, panel, src in zip(axes[0], panels, image_paths):
        image = ax.imshow(panel, cmap="gray", vmin=vmin, vmax=vmax)
        ax.set_title(Path(src).stem.split("__")[-1], fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(image, ax=axes[0].tolist(), shrink=0.8, label="dB")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, metadata={"Date": None} if out_path.suffix == ".svg" else None)
    plt.close(fig)
    return out_path
