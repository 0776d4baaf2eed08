"""Machine-checkable invariant suites backing the `verify` command.

Each check returns a CheckResult; the pytest suite and the CLI share these.
Checks tagged severity="warning" are empirical regularities (observed
envelopes of stable traces), reported but not fatal.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import fwcore
from .dynamics import (
    DomainError,
    PolarState,
    RSState,
    Termination,
    backward_G,
    check_jump_precondition,
    forward_F,
    in_M,
    ls_gamma,
    ls_polar_step,
    monotone_condition,
    polar_step,
    reconstruct_theta,
    sbar,
    threshold_g,
)
from .numeric import HARDWARE, Mode, PrecisionConfig, ScalarContext, extended
from .search import stable_phase_length
from .worstcase import ConstructionParams, construct_and_certify

P2 = (0.0, 1.0)


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    severity: str = "error"
    info: dict = field(default_factory=dict)

    @property
    def fatal(self) -> bool:
        return not self.passed and self.severity == "error"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "module": self.module,
            "passed": self.passed,
            "severity": self.severity,
            "info": self.info,
        }


def _sample_m(rng, ctx, min_r=0.0):
    r = ctx.scalar(min_r + (2 - min_r) * rng.random())
    while r == 0:
        r = ctx.scalar(min_r + (2 - min_r) * rng.random())
    with ctx.active():
        s = sbar(r, ctx) * ctx.scalar(rng.random())
    return r, s


def _sample_mtilde(rng, ctx, min_u=0.0, min_r=0.0):
    r = ctx.scalar((min_r + (1 / 3 - min_r) * rng.random()))
    while r == 0:
        r = ctx.scalar((min_r + (1 / 3 - min_r) * rng.random()))
    with ctx.active():
        s = ctx.scalar(min_u + (1 - min_u) * rng.random()) / (1 + r)
    return r, s


# ---------------------------------------------------------------------------
# dynamics

def check_forward_maps_m(n=100_000, ctx: ScalarContext = HARDWARE, seed=0) -> CheckResult:
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        r, s = _sample_m(rng, ctx)
        try:
            out = forward_F(RSState(r, s), ctx)
        except Termination:
            continue  # rs at the termination threshold: the run converged
        if not in_M(out.r, out.s, ctx):
            bad += 1
    return CheckResult("forward_maps_M", "dynamics", bad == 0, info={"samples": n, "violations": bad})


def check_roundtrip(n=100_000, ctx: ScalarContext = HARDWARE, seed=1) -> CheckResult:
    """F(G(r, s)) = (r, s) on sampled Mtilde points.

    The cancellation in F's numerator costs about 12 bits even on the
    construction's working region (s >= 1/2, r >= 0.05), so the tight bound
    there allows 14; near the corners the recovered s degrades like
    2^-bits/(r s)^2, so the full domain gets that envelope instead.
    """
    rng = random.Random(seed)
    tol = ctx.pow2(-(ctx.bits - 14))
    worst_tight = worst_any = 0.0
    bad = 0
    with ctx.active():
        for i in range(n):
            tight = i % 2 == 0
            r, s = _sample_mtilde(rng, ctx, min_u=0.5 if tight else 1e-6,
                                  min_r=0.05 if tight else 0.0)
            if s == 0:
                continue
            back = backward_G(RSState(r, s), ctx)
            try:
                fwd = forward_F(back, ctx)
            except Termination:
                bad += 1
                continue
            err = max(abs(fwd.r - r) / r, abs(fwd.s - s) / max(s, ctx.tiny))
            if tight:
                worst_tight = max(worst_tight, float(err))
                if err > tol:
                    bad += 1
            else:
                # three singular directions (r -> 0, s -> 0, s -> sbar) each
                # amplify roundoff; at worst the trip still holds to at least
                # half precision
                worst_any = max(worst_any, float(err))
                if err > max(tol * (1 + 1 / (r * s) ** 2), ctx.pow2(-(ctx.bits // 2 - 6))):
                    bad += 1
    return CheckResult(
        "backward_forward_roundtrip", "dynamics", bad == 0,
        info={"samples": n, "violations": bad,
              "max_rel_err_tight_region": worst_tight, "max_rel_err_anywhere": worst_any},
    )


def check_xy_lower_bound(n=100_000, ctx: ScalarContext = HARDWARE, seed=2, tol=1e-9) -> CheckResult:
    rng = random.Random(seed)
    lo = None
    bad = 0
    with ctx.active():
        bound = ctx.scalar(Fraction(5, 12)) - ctx.scalar(tol)
        for _ in range(n):
            r, s = _sample_mtilde(rng, ctx)
            xy = backward_G(RSState(r, s), ctx).s
            if lo is None or xy < lo:
                lo = xy
            if xy < bound:
                bad += 1
    return CheckResult(
        "xy_at_least_5_12", "dynamics", bad == 0,
        info={"samples": n, "violations": bad, "min_xy": float(lo)},
    )


def check_theta_reconstruction(n=300, ctx: ScalarContext = HARDWARE, seed=3) -> CheckResult:
    """Embed (r, reconstruct_theta(r, s)) in the plane, take one exact-line-search
    FW step through the ambient simulator, and recover contraction s."""
    rng = random.Random(seed)
    tol = ctx.pow2(-(ctx.bits - 20))
    worst = 0.0
    bad = 0
    inst = fwcore.BallInstance(target=P2)
    for _ in range(n):
        # theta collapses onto -1 as r -> 0 or s -> 0; stay off those corners
        r, s = _sample_m(rng, ctx, min_r=0.01)
        if s <= 0.01:
            continue
        theta = reconstruct_theta(RSState(r, s), ctx)
        x0 = fwcore.embed_polar(r, theta, P2, ctx)
        traj = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T=1, ctx=ctx)
        if len(traj) < 2 or traj.s[0] is None:
            bad += 1
            continue
        with ctx.active():
            err = abs(traj.s[0] - s)
        worst = max(worst, float(err))
        if err > tol:
            bad += 1
    return CheckResult(
        "theta_reconstruction_consistency", "dynamics", bad == 0,
        info={"samples": n, "violations": bad, "max_abs_err": worst},
    )


def check_representation_consistency(ctx: ScalarContext = HARDWARE, steps=None) -> CheckResult:
    """ls_polar_step composed over a trajectory reproduces iterated forward_F.

    Both routes feed the same unstable dynamics, so their difference grows by
    about one bit per step; the horizon and tolerance budget for that.
    """
    if steps is None:
        steps = max(5, (ctx.bits - 40) // 2)
    state = PolarState(ctx.scalar(1), ctx.scalar("-0.6"))
    rs = []
    cur = state
    for _ in range(steps + 1):
        nxt = ls_polar_step(cur, ctx)
        if nxt is None:
            break
        with ctx.active():
            rs.append((cur.r, nxt.r / cur.r))
        cur = nxt
    worst = 0.0
    st = RSState(rs[0][0], rs[0][1])
    with ctx.active():
        for k in range(1, len(rs)):
            st = forward_F(st, ctx)
            worst = max(
                worst,
                float(abs(st.r - rs[k][0]) / rs[k][0]),
                float(abs(st.s - rs[k][1]) / rs[k][1]),
            )
    tol = float(ctx.pow2(-(ctx.bits - 16 - 2 * len(rs))))
    return CheckResult(
        "polar_vs_contraction_representation", "dynamics", worst <= tol,
        info={"steps": len(rs), "max_rel_err": worst, "tol": tol},
    )


def check_jump_characterization(n_starts=1000, horizon=200, ctx: ScalarContext = HARDWARE, seed=4) -> CheckResult:
    rng = random.Random(seed)
    bad = 0
    checked = 0
    jumps = 0
    half = 0.5
    for _ in range(n_starts):
        r, s = _sample_m(rng, ctx)
        state = RSState(r, s)
        for _ in range(horizon):
            try:
                nxt = forward_F(state, ctx)
            except (Termination, DomainError):
                break
            checked += 1
            if float(nxt.s) < half:
                jumps += 1
            if not check_jump_precondition(state.r, state.s, nxt.s, ctx):
                bad += 1
            state = nxt
    return CheckResult(
        "jump_characterization", "dynamics", bad == 0,
        info={"starts": n_starts, "transitions": checked, "jumps": jumps, "violations": bad},
    )


def check_monotone_condition(n=20_000, ctx: ScalarContext = HARDWARE, seed=5) -> CheckResult:
    rng = random.Random(seed)
    bad = 0
    with ctx.active():
        margin = ctx.tiny
        for _ in range(n):
            r, s = _sample_mtilde(rng, ctx)
            if s == 0 or s >= 1:
                continue
            prev = backward_G(RSState(r, s), ctx).s
            if abs(s - prev) <= margin:
                continue  # too close to the threshold to trust either side
            if monotone_condition(RSState(r, s), ctx) != (s >= prev):
                bad += 1
    return CheckResult(
        "monotone_condition_vs_backward", "dynamics", bad == 0,
        info={"samples": n, "violations": bad},
    )


def check_threshold_curve(ctx: ScalarContext = HARDWARE) -> CheckResult:
    """g inverts r1 and matches 1 - (4/3) r to second order for small r."""
    worst_inv = 0.0
    with ctx.active():
        from .dynamics import r1_of_s

        for s in ("0.5", "0.6", "0.8", "0.95", "0.999"):
            sv = ctx.scalar(s)
            g = threshold_g(r1_of_s(sv, ctx), ctx)
            worst_inv = max(worst_inv, float(abs(g - sv)))
        ok_exp = True
        for r in ("1e-4", "1e-3", "1e-2"):
            rv = ctx.scalar(r)
            dev = abs(threshold_g(rv, ctx) - (1 - 4 * rv / 3))
            if dev > 3 * rv * rv:
                ok_exp = False
    tol = float(ctx.pow2(-(ctx.bits // 2)))
    return CheckResult(
        "monotonicity_threshold", "dynamics", worst_inv <= tol and ok_exp,
        info={"max_inversion_err": worst_inv, "expansion_ok": ok_exp},
    )


# ---------------------------------------------------------------------------
# fwcore

def _random_ball_start(rng, d):
    import math

    z = [rng.gauss(0, 1) for _ in range(d)]
    nz = math.sqrt(sum(v * v for v in z))
    u = rng.random() ** (1.0 / d)
    return [u * v / nz for v in z]


def check_invariant_subspace(ctx: ScalarContext = HARDWARE, seed=6, T=50) -> CheckResult:
    import math

    rng = random.Random(seed)
    worst = 0.0
    for d in (2, 3, 5):
        p = [0.0] * d
        p[-1] = 1.0
        x0 = _random_ball_start(rng, d)
        inst = fwcore.BallInstance(target=p)
        traj = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T=T, ctx=ctx, record_points=True)
        # orthonormal basis of span{p, x0}
        q = [x0[i] - x0[-1] * p[i] for i in range(d)]
        nq = math.sqrt(sum(v * v for v in q))
        if nq == 0:
            continue
        q = [v / nq for v in q]
        for pt in traj.points:
            cp = sum(float(a) * b for a, b in zip(pt, p))
            cq = sum(float(a) * b for a, b in zip(pt, q))
            res = [float(pt[i]) - cp * p[i] - cq * q[i] for i in range(d)]
            worst = max(worst, math.sqrt(sum(v * v for v in res)))
    tol = float(ctx.pow2(-(ctx.bits - 12)))
    return CheckResult(
        "invariant_subspace", "fwcore", worst <= tol,
        info={"max_offplane_norm": worst, "tol": tol},
    )


def check_upper_bound(n=100, T=200, ctx: ScalarContext = HARDWARE, seed=7) -> CheckResult:
    rng = random.Random(seed)
    slack = float(ctx.pow2(-40))
    bad = 0
    worst = -1.0
    for trial in range(n):
        d = (2, 3, 5)[trial % 3]
        p = [0.0] * d
        p[-1] = 1.0
        x0 = _random_ball_start(rng, d)
        inst = fwcore.BallInstance(target=p)
        traj = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T=T, ctx=ctx)
        if len(traj) < 2:
            continue
        r0 = float(traj.r[0])
        for t in range(1, len(traj)):
            rt = float(traj.r[t])
            if rt <= 0:
                break
            bound = 1.0 / (t + 1.0 / r0)
            worst = max(worst, (rt - bound) / bound)
            if rt > bound * (1 + slack):
                bad += 1
    return CheckResult(
        "reciprocal_upper_bound", "fwcore", bad == 0,
        info={"starts": n, "violations": bad, "worst_rel_slack": worst},
    )


def check_rule_coincidence(ctx: ScalarContext = HARDWARE, seed=8, T=100) -> CheckResult:
    rng = random.Random(seed)
    worst = 0.0
    inst = fwcore.BallInstance(target=P2)
    for _ in range(10):
        x0 = _random_ball_start(rng, 2)
        a = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T=T, ctx=ctx)
        b = fwcore.run_fw(inst, x0, fwcore.SHORT_STEP, T=T, ctx=ctx)
        for t in range(min(len(a), len(b))):
            worst = max(worst, abs(float(a.r[t]) - float(b.r[t])))
    tol = float(ctx.pow2(-(ctx.bits - 10)))
    return CheckResult(
        "short_step_equals_line_search", "fwcore", worst <= tol,
        info={"max_r_deviation": worst, "tol": tol},
    )


def check_feasibility_and_contraction(ctx: ScalarContext = HARDWARE, seed=9, T=100) -> CheckResult:
    import math

    rng = random.Random(seed)
    bad_feas = bad_mono = 0
    inst = fwcore.BallInstance(target=P2)
    slack = float(ctx.tiny)
    for _ in range(20):
        x0 = _random_ball_start(rng, 2)
        traj = fwcore.run_fw(inst, x0, fwcore.EXACT_LINE_SEARCH, T=T, ctx=ctx, record_points=True)
        for pt in traj.points:
            if math.sqrt(sum(float(v) ** 2 for v in pt)) > 1 + slack:
                bad_feas += 1
        for t in range(len(traj) - 1):
            rt = float(traj.r[t])
            if float(traj.r[t + 1]) > rt / (1 + rt) * (1 + slack):
                bad_mono += 1
    return CheckResult(
        "feasibility_and_residual_contraction", "fwcore", bad_feas == 0 and bad_mono == 0,
        info={"feasibility_violations": bad_feas, "contraction_violations": bad_mono},
    )


def check_affine_equivalence(ctx: ScalarContext = HARDWARE) -> CheckResult:
    inst = fwcore.EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1))
    rep = fwcore.verify_affine_equivalence(inst, (0.3, -0.8), T=50, ctx=ctx)
    ident = fwcore.EllipsoidInstance(A=((1, 0), (0, 1)), alpha=2, c=(0, -2))
    rep_id = fwcore.verify_affine_equivalence(ident, (0.5, -0.5), T=20, ctx=ctx)
    ok = (
        rep.max_gap_deviation <= 1e-8
        and rep.max_point_deviation <= 1e-8
        and rep_id.max_gap_deviation <= float(ctx.tiny)
    )
    return CheckResult(
        "affine_equivalence", "fwcore", ok,
        info={
            "diag41_gap_dev": rep.max_gap_deviation,
            "diag41_point_dev": rep.max_point_deviation,
            "identity_gap_dev": rep_id.max_gap_deviation,
        },
    )


# ---------------------------------------------------------------------------
# worstcase

def _coeff_grid(ctx, nr, nc):
    with ctx.active():
        for i in range(nr):
            r = ctx.scalar(Fraction(i + 1, nr * 10))  # (0, 1/10]
            for j in range(nc):
                c = ctx.scalar(1 + Fraction(3 * j, 2 * (nc - 1)))  # [1, 5/2]
                yield r, c


def check_xy_band_grid(ctx: ScalarContext = None, nr=200, nc=100, tol=1e-9) -> CheckResult:
    ctx = ctx or extended(256)
    bad = 0
    with ctx.active():
        tolv = ctx.scalar(tol)
        for r, c in _coeff_grid(ctx, nr, nc):
            s = 1 - 4 * r / 3 + c * r * r
            X = (1 + r) * s * s - r
            Y = ctx.sqrt((1 - s * s) * (1 - (1 + r) ** 2 * s * s))
            mid = 1 - 4 * r / 3 + (ctx.scalar(Fraction(11, 9)) - c / 2) * r * r
            if not (mid - 5 * r ** 3 - tolv <= X + Y <= mid + 2 * r ** 3 + tolv):
                bad += 1
    return CheckResult(
        "xy_second_order_band", "worstcase", bad == 0,
        info={"grid": [nr, nc], "violations": bad, "tol": tol},
    )


def check_c_interval_grid(ctx: ScalarContext = None, nr=200, nc=100, tol=1e-9) -> CheckResult:
    ctx = ctx or extended(256)
    bad = 0
    cmin, cmax = float("inf"), float("-inf")
    with ctx.active():
        lo = 1 - ctx.scalar(tol)
        hi = ctx.scalar(Fraction(5, 2)) + ctx.scalar(tol)
        for r, c in _coeff_grid(ctx, nr, nc):
            s = 1 - 4 * r / 3 + c * r * r
            out = backward_G(RSState(r, s), ctx)
            cp = (out.s - 1 + 4 * out.r / 3) / (out.r * out.r)
            cmin, cmax = min(cmin, float(cp)), max(cmax, float(cp))
            if not lo <= cp <= hi:
                bad += 1
    return CheckResult(
        "backward_c_interval_preserved", "worstcase", bad == 0,
        info={"grid": [nr, nc], "violations": bad, "c_range": [cmin, cmax], "tol": tol},
    )


def check_construction_soundness(T=200, ctx_bits=None) -> CheckResult:
    precision = PrecisionConfig(Mode.EXTENDED, ctx_bits) if ctx_bits else None
    result, replay, cert = construct_and_certify(ConstructionParams(T=T, precision=precision))
    ok = cert.passed and result.T_hat >= T and 1 / 18 - 1e-12 <= cert.r0 < 0.1
    return CheckResult(
        "construction_soundness", "worstcase", ok,
        info={"T": T, "T_hat": result.T_hat, "r0": cert.r0, "slope": cert.slope_estimate,
              "roundtrip_max_err": cert.roundtrip_max_err},
    )


def check_precision_sensitivity(T=1000) -> CheckResult:
    """The stable phase of the replay is strictly shorter at hardware precision."""
    result, replay, cert = construct_and_certify(ConstructionParams(T=T))
    hard = stable_phase_length(float(result.start.r), float(result.start.s), cap=T, ctx=HARDWARE)
    ok = cert.monotone_s and hard.tau < T
    return CheckResult(
        "precision_sensitivity", "worstcase", ok,
        info={"T": T, "hardware_stable_phase": hard.tau, "extended_monotone": cert.monotone_s},
    )


def check_perturbation_fragility(T=200, scale=1e-6) -> CheckResult:
    """Scaling the stepsize by 1 + scale breaks monotonicity of the replay."""
    result, _, _ = construct_and_certify(ConstructionParams(T=T))
    ctx = result.ctx
    theta = reconstruct_theta(result.start, ctx)
    state = PolarState(result.start.r, theta)
    with ctx.active():
        bump = 1 + ctx.scalar(scale)
        prev_s = None
        first_break = None
        r_prev = state.r
        for t in range(T):
            gamma = min(ls_gamma(state, ctx) * bump, ctx.scalar(1))
            nxt = polar_step(state, gamma, ctx)
            if nxt is None:
                first_break = t
                break
            s_t = nxt.r / r_prev
            if prev_s is not None and s_t < prev_s:
                first_break = t
                break
            prev_s = s_t
            r_prev = nxt.r
            state = nxt
    ok = first_break is not None and first_break < T
    return CheckResult(
        "stepsize_perturbation_fragility", "worstcase", ok,
        info={"T": T, "scale": scale, "first_monotonicity_break": first_break},
    )


# ---------------------------------------------------------------------------
# search

def check_tau_consistency(ctx: ScalarContext = HARDWARE) -> CheckResult:
    from .worstcase import forward_replay

    res = stable_phase_length(1.0, 0.43, cap=500, ctx=ctx, keep_trace=True)
    replay = forward_replay(RSState(ctx.scalar(1), ctx.scalar(0.43)), res.tau, ctx)
    count = 0
    for t in range(len(replay) - 1):
        if not replay[t].s <= replay[t + 1].s:
            break
        count += 1
    ok = count == res.tau and len(res.trace) == res.tau + 1
    return CheckResult("tau_matches_replay", "search", ok, info={"tau": res.tau})


def check_stable_trace_bounds(ctx: ScalarContext = None) -> CheckResult:
    """Empirical envelope of stable traces: 1 - (4/3) r <= s <= g(r) + tol.

    These are observed regularities, so failures downgrade to a
    warning.  Also re-checks that no jump happens inside the stable phase.
    """
    from .dynamics import r1_of_s
    from .search import bisection_search

    ctx = ctx or extended(256)
    res = bisection_search(1, "0.4", "0.5", iters=60, cap=10_000, ctx=ctx)
    below = above = jump_viol = 0
    with ctx.active():
        tol = ctx.scalar(1e-6)
        r_dom = r1_of_s(ctx.scalar("0.49"), ctx)
        for t, st in enumerate(res.trace):
            r, s = st.r, st.s
            if r <= ctx.scalar(Fraction(1, 10)) and s < 1 - 4 * r / 3:
                below += 1
            # skip t = tau: the phase breaks there precisely because s crossed g
            if t < res.tau and 0 < r <= r_dom and s > threshold_g(r, ctx) + tol:
                above += 1
            if t + 1 < len(res.trace):
                nxt = res.trace[t + 1]
                if s <= 1 / (1 + r) ** 2 and nxt.s < ctx.scalar(Fraction(1, 2)):
                    jump_viol += 1
    ok = below == 0 and above == 0 and jump_viol == 0
    return CheckResult(
        "stable_trace_envelope", "search", ok, severity="warning",
        info={"tau": res.tau, "below_affine": below, "above_g": above,
              "jumps_in_stable_phase": jump_viol},
    )


# ---------------------------------------------------------------------------
# registry

def default_suite(ctx: ScalarContext = None, samples: int = 100_000, seed: int = 0):
    """(module, thunk) pairs for the full suite at the given context."""
    ctx = ctx or extended(256)
    n_small = max(200, samples // 300)
    return [
        ("dynamics", lambda: check_forward_maps_m(samples, ctx, seed)),
        ("dynamics", lambda: check_roundtrip(samples, ctx, seed + 1)),
        ("dynamics", lambda: check_xy_lower_bound(samples, ctx, seed + 2)),
        ("dynamics", lambda: check_theta_reconstruction(n_small, ctx, seed + 3)),
        ("dynamics", lambda: check_representation_consistency(ctx)),
        ("dynamics", lambda: check_jump_characterization(1000, 200, HARDWARE, seed + 4)),
        ("dynamics", lambda: check_monotone_condition(max(1000, samples // 5), ctx, seed + 5)),
        ("dynamics", lambda: check_threshold_curve(ctx)),
        ("fwcore", lambda: check_invariant_subspace(HARDWARE, seed + 6)),
        ("fwcore", lambda: check_upper_bound(100, 200, HARDWARE, seed + 7)),
        ("fwcore", lambda: check_rule_coincidence(HARDWARE, seed + 8)),
        ("fwcore", lambda: check_feasibility_and_contraction(HARDWARE, seed + 9)),
        ("fwcore", lambda: check_affine_equivalence(HARDWARE)),
        ("worstcase", lambda: check_xy_band_grid(ctx if ctx.bits >= 256 else None)),
        ("worstcase", lambda: check_c_interval_grid(ctx if ctx.bits >= 256 else None)),
        ("worstcase", lambda: check_construction_soundness(200)),
        ("worstcase", lambda: check_precision_sensitivity(1000)),
        ("search", lambda: check_tau_consistency(HARDWARE)),
        ("search", lambda: check_stable_trace_bounds()),
    ]


def run_suite(ctx=None, samples=100_000, seed=0, modules=None, perturb_gamma=None):
    """Run the invariant checks, optionally filtered by module name."""
    checks = default_suite(ctx, samples, seed)
    if perturb_gamma is not None:
        checks.append(("worstcase", lambda: check_perturbation_fragility(scale=perturb_gamma)))
    return [thunk() for module, thunk in checks if not modules or module in modules]
