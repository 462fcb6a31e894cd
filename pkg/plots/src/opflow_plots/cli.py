"""Command-line renderer: ``render --manifest <path> --out <path> [--format png|svg]``."""

from __future__ import annotations

import argparse
import sys

from .render import RenderError, render_figure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    parser.add_argument("--manifest", required=True, help="experiment manifest JSON")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", choices=["png", "svg"], default=None)
    args = parser.parse_args(argv)
    try:
        info = render_figure(args.manifest, args.out, fmt=args.format)
    except RenderError as err:
        print(f"render error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {info.out_path} ({info.spy_panels} spy + {info.dynamics_panels} dynamics panels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
