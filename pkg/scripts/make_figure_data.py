#!/usr/bin/env python3
"""Generate every figure dataset in one pass.

Produces, under the output directory:
  rates/         per-run t,gap CSVs for the three optimizer regimes (+ iterate
                 coordinates on the disk for the semicircle plots)
  heatmap.csv    iterations-to-1e-4 over the unit disk
  gridsearch.csv stable-phase length over an s0 grid
  bisect/        refined stable trace from the parity bisection
  worstcase/     backward/replay/ambient/semicircle CSVs and the certificate
  phase/         worst-case trajectory in (r,s) with the three overlay curves

Pass --fast for a desk-scale smoke run.
"""

import argparse
import sys
from pathlib import Path

from fwbound.experiments import main as fwbound_main


def sh(*argv) -> None:
    argv = [str(a) for a in argv]
    print("+ fwbound " + " ".join(argv))
    code = fwbound_main(argv)
    if code != 0:
        sys.exit(code)


def run(out: Path, fast: bool) -> None:
    horizon = 1000 if fast else 10_000
    wc_horizon = 200 if fast else 1000
    grid_n = 101 if fast else 201
    samples = 1000 if fast else 10_000

    sh("run", "--horizon", horizon, "--runs", 3, "--seed", 0, "--semicircle",
       "--out", out / "rates")
    sh("heatmap", "--grid-n", grid_n, "--out", out / "heatmap.csv")
    sh("gridsearch", "--grid-n", samples, "--cap", 200, "--out", out / "gridsearch.csv")
    sh("bisect", "--precision-bits", 256, "--iters", 60, "--out", out / "bisect")
    sh("worstcase", "--horizon", wc_horizon, "--out", out / "worstcase")
    sh("phase", "--in", out / "worstcase" / "replay.csv", "--grid-n", 400,
       "--out", out / "phase")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figure_data"))
    ap.add_argument("--fast", action="store_true")
    args = ap.parse_args()
    run(args.out, args.fast)
    print(f"all figure data under {args.out}/")
