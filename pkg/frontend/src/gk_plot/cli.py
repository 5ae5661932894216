"""gk-plot: render figures from granular-kinetics CSV outputs.

Usage:
    gk-plot <kind> --in FILE [FILE ...] --out PATH [--title TEXT]

Kinds: haff, profile, sweep, eigen, lyapunov. Exits 0 on success, 2 on
usage or input-validation failure, 3 on unexpected runtime errors.
"""

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gk-plot", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="FILE", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="", help="override figure title")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          output=args.out, title=args.title)
        render(spec)
    except (SchemaError, OSError) as exc:
        print(f"gk-plot: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"gk-plot: runtime error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
