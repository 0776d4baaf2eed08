"""CLI: render one figure per invocation; batch mode is shell composition."""

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fwplots", description="Render fwbound exports")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a figure from CSV exports")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--guides", action="store_true",
                   help="add t^-1 / t^-2 reference slopes (rates)")
    p.add_argument("--shade", action="store_true",
                   help="shade the stable/unstable regions (phase)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.out,
                      guides=args.guides, shade=args.shade)
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
