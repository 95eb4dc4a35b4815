"""Entry points: plot-traces <manifest> --out DIR; plot-doppler <img...> --out FILE."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_convergence, plot_doppler
from .io import FormatError


def main_traces(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot-traces")
    parser.add_argument("manifest")
    parser.add_argument("--out", default="figures")
    args = parser.parse_args(argv)
    try:
        written = plot_convergence(args.manifest, args.out)
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


def main_doppler(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot-doppler")
    parser.add_argument("images", nargs="+")
    parser.add_argument("--out", default="doppler.png")
    args = parser.parse_args(argv)
    try:
        written = plot_doppler(args.images, args.out)
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    sys.exit(main_traces())
