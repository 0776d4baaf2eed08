"""Command-line drivers: rate sweeps, convergence heatmap, worst-case runs,
stable-phase searches, phase portraits, and the invariant verifier.

Every command is deterministic for a fixed seed and backend, and the exit
status is 0 iff all requested checks pass.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import fwcore, search, verification, worstcase
from .dynamics import r1_of_s, reconstruct_theta, sbar, threshold_g
from .numeric import Mode, PrecisionConfig, ScalarContext, make_context

REGIME_SCALE = {"boundary": 1.0, "interior": 0.5, "exterior": 2.0}


@dataclass
class ExperimentConfig:
    command: str
    out: Path
    precision: PrecisionConfig = field(default_factory=PrecisionConfig)
    horizon: int = 1000
    seed: int = 0
    fmt: str = "csv"
    tol: float = 1e-4
    grid_n: int = 201
    r0: float = 1.0
    s0: Optional[float] = None
    lo: float = 0.4
    hi: float = 0.5
    iters: int = 60
    cap: int = search.DEFAULT_CAP
    epsilon: Optional[Fraction] = None
    rmax: Fraction = Fraction(1, 10)
    runs: int = 3
    regime: str = "all"
    rule: str = fwcore.EXACT_LINE_SEARCH
    dimension: int = 2
    stop_gap: float = 0.0
    in_path: Optional[Path] = None
    modules: Optional[list] = None
    samples: int = 100_000
    perturb_gamma: Optional[float] = None
    semicircle: bool = False
    slow: bool = False
    hardware_forced: bool = False

    @property
    def ctx(self) -> ScalarContext:
        return make_context(self.precision)


def _write_table(path: Path, header, rows, fmt="csv"):
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    else:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(c) for c in row) + "\n")
    print(f"wrote {path}")


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


def _random_ball_points(rng, d, count):
    pts = []
    for _ in range(count):
        z = rng.normal(size=d)
        z /= np.linalg.norm(z)
        pts.append(tuple(float(v) for v in z * rng.random() ** (1.0 / d)))
    return pts


# ---------------------------------------------------------------------------
# run: rate sweeps across the three optimizer regimes (one CSV per run)

def cmd_run(cfg: ExperimentConfig) -> int:
    ctx = cfg.ctx
    rng = np.random.default_rng(cfg.seed)
    regimes = list(REGIME_SCALE) if cfg.regime == "all" else [cfg.regime]
    d = cfg.dimension
    p = [0.0] * d
    p[-1] = 1.0
    manifest = {}
    for regime in regimes:
        target = tuple(REGIME_SCALE[regime] * v for v in p)
        inst = fwcore.BallInstance(target=target)
        starts = _random_ball_points(rng, d, cfg.runs)
        for i, x0 in enumerate(starts):
            traj = fwcore.run_fw(inst, x0, cfg.rule, cfg.horizon, cfg.stop_gap, ctx=ctx,
                                 record_points=cfg.semicircle and d == 2)
            name = f"rates_{regime}_{i:02d}"
            dec = ctx.decimal
            _write_table(cfg.out / f"{name}.{cfg.fmt}", ["t", "gap"],
                         [(traj.t[k], dec(traj.gap[k])) for k in range(len(traj))], cfg.fmt)
            if traj.points is not None:
                _write_table(cfg.out / f"{name}_points.{cfg.fmt}", ["t", "x", "y"],
                             [(traj.t[k], dec(traj.points[k][0]), dec(traj.points[k][1]))
                              for k in range(len(traj))], cfg.fmt)
            manifest[name] = traj.descriptor() | {"x0": [float(v) for v in x0]}
    _write_json(cfg.out / "run_manifest.json", manifest)
    return 0


# ---------------------------------------------------------------------------
# heatmap: iterations to reach the accuracy tol from each point of the disk

def heatmap_grid(n: int, tol: float, cap: int):
    """Vectorized exact-line-search iteration counts on an n x n disk grid.

    Uses the polar closed form of the line-search step, which reproduces the
    ambient simulation exactly (the suite checks that equivalence).
    """
    axis = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    feas = X**2 + Y**2 <= 1.0
    x, y = X[feas], Y[feas]
    dy = y - 1.0
    r = np.hypot(x, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        th = np.where(r > 0, dy / np.where(r > 0, r, 1.0), -1.0)
    iters = np.zeros(r.shape, dtype=int)
    active = r * r > tol
    k = 0
    while active.any() and k < cap:
        k += 1
        ra, ta = r[active], th[active]
        den = (ra + 1) ** 2 + 2 * (ra + 1) * ta + 1
        r1 = np.sqrt(np.maximum(ra * ra * (1 - ta * ta) / den, 0.0))
        t1 = np.clip(np.where(r1 > 0, -(ra + 1) / ra * r1, -1.0), -1.0, 0.0)
        r[active] = r1
        th[active] = t1
        iters[active] = k
        active = r * r > tol
    return x, y, iters


def cmd_heatmap(cfg: ExperimentConfig) -> int:
    if cfg.precision.mode is not Mode.HARDWARE:
        print("note: the heatmap sweep always runs at hardware precision", file=sys.stderr)
    x, y, iters = heatmap_grid(cfg.grid_n, cfg.tol, cfg.horizon)
    rows = [(repr(float(a)), repr(float(b)), int(k)) for a, b, k in zip(x, y, iters)]
    out = cfg.out if cfg.out.suffix else cfg.out / f"heatmap.{cfg.fmt}"
    _write_table(out, ["x", "y", "iters"], rows, cfg.fmt)
    print(f"max iterations over {len(rows)} feasible points: {iters.max()}")
    return 0


# ---------------------------------------------------------------------------
# worstcase: construction, replay, certificate, ambient embedding

def cmd_worstcase(cfg: ExperimentConfig) -> int:
    T = 10_000 if (cfg.slow and cfg.horizon == 1000) else cfg.horizon
    precision = cfg.precision
    if precision.mode is Mode.HARDWARE and precision.mantissa_bits == 53 and not cfg.hardware_forced:
        precision = PrecisionConfig(Mode.EXTENDED, worstcase.default_bits(T))
    params = worstcase.ConstructionParams(
        T=T, epsilon=cfg.epsilon, r_max=cfg.rmax, precision=precision
    )
    t0 = time.perf_counter()
    try:
        result, replay, cert = worstcase.construct_and_certify(params)
    except worstcase.ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 1
    ctx = result.ctx
    dec = ctx.decimal

    _write_table(cfg.out / f"backward.{cfg.fmt}", ["t", "r", "s"],
                 [(t, dec(st.r), dec(st.s)) for t, st in enumerate(result.backward)], cfg.fmt)
    _write_table(cfg.out / f"replay.{cfg.fmt}", ["t", "r", "s"],
                 [(t, dec(st.r), dec(st.s)) for t, st in enumerate(replay)], cfg.fmt)

    # ambient FW run from the embedded start (genuine trajectory for Figs 5/7a)
    theta0 = reconstruct_theta(result.start, ctx)
    x0 = fwcore.embed_polar(result.start.r, theta0, (0, 1), ctx)
    inst = fwcore.BallInstance(target=(0, 1))
    traj = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T, ctx=ctx, record_points=True)
    traj.to_csv(cfg.out / "ambient.csv")
    print(f"wrote {cfg.out / 'ambient.csv'}")
    _write_table(cfg.out / f"gap.{cfg.fmt}", ["t", "gap"],
                 [(traj.t[k], dec(traj.gap[k])) for k in range(len(traj))], cfg.fmt)
    _write_table(cfg.out / f"semicircle.{cfg.fmt}", ["t", "x", "y"],
                 [(traj.t[k], dec(traj.points[k][0]), dec(traj.points[k][1]))
                  for k in range(len(traj))], cfg.fmt)

    with ctx.active():
        dev = max(
            (abs(traj.r[t] - replay[t].r) / replay[t].r for t in range(min(len(traj), len(replay)))),
            default=ctx.scalar(0),
        )
    payload = cert.to_json() | {
        "params": params.to_json(),
        "ambient_max_r_rel_deviation": float(dev),
        "wall_time_seconds": time.perf_counter() - t0,
    }
    _write_json(cfg.out / "certificate.json", payload)
    status = "PASS" if cert.passed else "FAIL"
    print(f"certificate {status}: T_hat={result.T_hat} r0={cert.r0:.6f} "
          f"slope={cert.slope_estimate:.4f} c=[{cert.c_min:.4f}, {cert.c_max:.4f}]")
    for msg in cert.failures:
        print(f"  failure: {msg}", file=sys.stderr)
    return 0 if cert.passed else 1


# ---------------------------------------------------------------------------
# gridsearch / bisect: stable-phase maximization

def cmd_gridsearch(cfg: ExperimentConfig) -> int:
    ctx = cfg.ctx
    results = search.grid_search(cfg.r0, cfg.grid_n, cfg.cap, ctx)
    dec = ctx.decimal
    out = cfg.out if cfg.out.suffix else cfg.out / f"gridsearch.{cfg.fmt}"
    _write_table(out, ["s0", "tau"], [(dec(res.s0), res.tau) for res in results], cfg.fmt)
    best = max(results, key=lambda res: res.tau)
    print(f"max tau = {best.tau} at s0 = {float(best.s0)!r}"
          + (" (censored)" if best.censored else ""))
    return 0


def cmd_bisect(cfg: ExperimentConfig) -> int:
    ctx = cfg.ctx
    res = search.bisection_search(cfg.r0, cfg.lo, cfg.hi, cfg.iters, cfg.cap, ctx)
    dec = ctx.decimal
    _write_table(cfg.out / f"trace.{cfg.fmt}", ["t", "r", "s"],
                 [(t, dec(st.r), dec(st.s)) for t, st in enumerate(res.trace)], cfg.fmt)
    _write_json(cfg.out / "bisect_summary.json", {
        "r0": float(cfg.r0),
        "s0": float(res.s0),
        "s0_decimal": dec(res.s0),
        "tau": res.tau,
        "censored": res.censored,
        "censored_by_precision": res.precision_limited,
        "iters": cfg.iters,
        "precision": cfg.precision.to_json(),
    })
    print(f"tau = {res.tau} at s0 = {float(res.s0)!r}"
          + (" [censored-by-precision]" if res.precision_limited else ""))
    return 0


# ---------------------------------------------------------------------------
# phase: portrait of a trace plus the three overlay curves

def _read_rs_csv(path: Path):
    rows = path.read_text().strip().splitlines()
    if not rows:
        return []
    header = rows[0].split(",")
    ir, is_ = header.index("r"), header.index("s")
    return [(line.split(",")[ir], line.split(",")[is_]) for line in rows[1:]]


def cmd_phase(cfg: ExperimentConfig) -> int:
    ctx = cfg.ctx
    n = cfg.grid_n
    if cfg.in_path:
        trace = _read_rs_csv(cfg.in_path)
    elif cfg.s0 is not None:
        res = search.stable_phase_length(cfg.r0, cfg.s0, cfg.cap, ctx, keep_trace=True)
        trace = [(ctx.decimal(st.r), ctx.decimal(st.s)) for st in res.trace]
    else:
        trace = []
    _write_table(cfg.out / f"trajectory.{cfg.fmt}", ["r", "s"], trace, cfg.fmt)
    dec = ctx.decimal
    with ctx.active():
        rows = []
        for i in range(n):
            r = ctx.scalar(2) * (i + 1) / n
            rows.append((dec(r), dec(sbar(r, ctx))))
        _write_table(cfg.out / f"curve_sbar.{cfg.fmt}", ["r", "s"], rows, cfg.fmt)
        r_top = r1_of_s(ctx.scalar("0.49"), ctx)
        rows = []
        for i in range(n):
            r = r_top * (ctx.scalar(i + 1) / n)  # ratio first: endpoint hits r_top exactly
            rows.append((dec(r), dec(threshold_g(r, ctx))))
        _write_table(cfg.out / f"curve_g.{cfg.fmt}", ["r", "s"], rows, cfg.fmt)
        rows = []
        for i in range(n):
            r = ctx.scalar(Fraction(3, 4)) * (i + 1) / n
            rows.append((dec(r), dec(1 - 4 * r / 3)))
        _write_table(cfg.out / f"curve_affine.{cfg.fmt}", ["r", "s"], rows, cfg.fmt)
    return 0


# ---------------------------------------------------------------------------
# verify: the machine-readable invariant report

def cmd_verify(cfg: ExperimentConfig) -> int:
    ctx = cfg.ctx if cfg.precision.mode is Mode.EXTENDED else None
    results = verification.run_suite(
        ctx=ctx, samples=cfg.samples, seed=cfg.seed,
        modules=cfg.modules, perturb_gamma=cfg.perturb_gamma,
    )
    fatal = 0
    for res in results:
        status = "PASS" if res.passed else ("WARN" if res.severity == "warning" else "FAIL")
        fatal += res.fatal
        print(f"{status} {res.module}.{res.name} {res.info}")
    if cfg.out is not None:
        _write_json(cfg.out, {
            "passed": fatal == 0,
            "checks": [res.to_json() for res in results],
        })
    return 0 if fatal == 0 else 1


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p, out_default=None, out_required=True):
    p.add_argument("--precision-bits", type=int, default=None,
                   help="mantissa bits for Extended mode (default: hardware doubles)")
    p.add_argument("--hardware", action="store_true",
                   help="force hardware doubles even where Extended is the default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    if out_required:
        p.add_argument("--out", type=Path, required=out_default is None, default=out_default)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fwbound",
        description="Worst-case Frank-Wolfe trajectories on strongly convex sets",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="rate sweeps across optimizer regimes (t,gap CSVs)")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--regime", choices=("boundary", "interior", "exterior", "all"), default="all")
    p.add_argument("--rule", choices=(fwcore.EXACT_LINE_SEARCH, fwcore.SHORT_STEP),
                   default=fwcore.EXACT_LINE_SEARCH)
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--stop-gap", type=float, default=0.0)
    p.add_argument("--semicircle", action="store_true", help="also export t,x,y iterate CSVs")

    p = sub.add_parser("heatmap", help="iterations-to-accuracy over the unit disk (x,y,iters)")
    _add_common(p)
    p.add_argument("--grid-n", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--horizon", type=int, default=200)

    p = sub.add_parser("worstcase", help="backward-forward construction + certificate")
    _add_common(p)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--epsilon", type=Fraction, default=None)
    p.add_argument("--rmax", type=Fraction, default=Fraction(1, 10))
    p.add_argument("--slow", action="store_true",
                   help="full-scale run (T=10000 unless --horizon is given)")

    p = sub.add_parser("gridsearch", help="stable-phase length over an s0 grid (s0,tau)")
    _add_common(p)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--grid-n", type=int, default=10_000)
    p.add_argument("--cap", type=int, default=search.DEFAULT_CAP)

    p = sub.add_parser("bisect", help="parity-guided bisection for long stable phases")
    _add_common(p)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--lo", type=float, default=0.4)
    p.add_argument("--hi", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=60)
    p.add_argument("--cap", type=int, default=search.DEFAULT_CAP)

    p = sub.add_parser("phase", help="phase portrait CSVs: trace plus overlay curves")
    _add_common(p)
    p.add_argument("--in", dest="in_path", type=Path, default=None,
                   help="t,r,s trace produced by worstcase or bisect")
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=None,
                   help="generate the trace from (r0, s0) when --in is absent")
    p.add_argument("--cap", type=int, default=search.DEFAULT_CAP)
    p.add_argument("--grid-n", type=int, default=256)

    p = sub.add_parser("verify", help="run the invariant suites; exit 0 iff all pass")
    _add_common(p, out_required=False)
    p.add_argument("--out", type=Path, default=None, help="optional JSON report path")
    p.add_argument("--module", dest="modules", action="append",
                   choices=("numeric", "fwcore", "dynamics", "worstcase", "search"))
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--perturb-gamma", type=float, default=None,
                   help="also check that scaling gamma by 1+x breaks the stable phase")
    return ap


def config_from_args(args) -> ExperimentConfig:
    if args.hardware:
        precision = PrecisionConfig()
    elif args.precision_bits is not None:
        precision = PrecisionConfig(Mode.EXTENDED, args.precision_bits)
    else:
        precision = PrecisionConfig()
    cfg = ExperimentConfig(command=args.command, out=getattr(args, "out", None),
                           precision=precision, seed=args.seed, fmt=args.fmt)
    cfg.hardware_forced = args.hardware
    for name in ("horizon", "runs", "regime", "rule", "dimension", "stop_gap", "semicircle",
                 "grid_n", "tol", "epsilon", "rmax", "slow", "r0", "s0", "lo", "hi", "iters",
                 "cap", "in_path", "modules", "samples", "perturb_gamma"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


COMMANDS = {
    "run": cmd_run,
    "heatmap": cmd_heatmap,
    "worstcase": cmd_worstcase,
    "gridsearch": cmd_gridsearch,
    "bisect": cmd_bisect,
    "phase": cmd_phase,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    return COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
