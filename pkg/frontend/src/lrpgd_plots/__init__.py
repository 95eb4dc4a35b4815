"""Batch figure rendering for lrpgd experiment outputs."""

from .figures import plot_convergence, plot_doppler
from .io import FormatError, read_manifest, read_matrix, read_trace

__all__ = [
    "FormatError",
    "plot_convergence",
    "plot_doppler",
    "read_manifest",
    "read_matrix",
    "read_trace",
]
__version__ = "0.1.0"
