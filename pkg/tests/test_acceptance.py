"""Acceptance gate: every criterion at its stated tolerance and budget.

Run with `pytest -s tests/test_acceptance.py` to see one line per criterion.
The full-scale reproduction is opt-in: `pytest -m slow`.
"""

import math
import time
import warnings
from fractions import Fraction

import pytest

from fwbound import extended
from fwbound.dynamics import RSState, backward_G, forward_F
from fwbound.experiments import heatmap_grid
from fwbound.fwcore import EXACT_LINE_SEARCH, BallInstance, EllipsoidInstance, run_fw, verify_affine_equivalence
from fwbound.numeric import HARDWARE, Mode, PrecisionConfig
from fwbound.search import bisection_search, stable_phase_length
from fwbound.verification import (
    check_xy_band_grid,
    check_jump_characterization,
    check_c_interval_grid,
    check_upper_bound,
    check_xy_lower_bound,
)
from fwbound.worstcase import ConstructionParams, construct_and_certify


def report(name, elapsed=None):
    suffix = f" ({elapsed:.3f}s)" if elapsed is not None else ""
    print(f"[acceptance] {name}: PASS{suffix}")


@pytest.fixture(scope="module")
def t1000():
    t0 = time.perf_counter()
    bundle = construct_and_certify(
        ConstructionParams(T=1000, precision=PrecisionConfig(Mode.EXTENDED, 2064))
    )
    return bundle, time.perf_counter() - t0


def test_two_step_termination():
    inst = BallInstance((0.0, 1.0))
    r0 = math.sqrt(2)
    schedule = [r0 / (1 + r0), 1.0]
    run_fw(inst, (1, 0), schedule, T=2)  # warmup
    t0 = time.perf_counter()
    traj = run_fw(inst, (1, 0), schedule, T=2)
    elapsed = time.perf_counter() - t0
    assert traj.t[-1] == 2
    assert traj.gap[-1] <= 2**-40
    assert elapsed < 1e-3
    report("two-step termination", elapsed)


def test_upper_bound_sandwich():
    t0 = time.perf_counter()
    res = check_upper_bound(n=100, T=200, ctx=HARDWARE, seed=7)
    elapsed = time.perf_counter() - t0
    assert res.passed, res.info
    assert elapsed < 1.0
    report("reciprocal upper bound on 100 random starts", elapsed)


def test_heatmap_bound():
    t0 = time.perf_counter()
    x, y, iters = heatmap_grid(201, tol=1e-4, cap=200)
    elapsed = time.perf_counter() - t0
    assert len(x) == 31413  # feasible points of the 201 x 201 grid
    assert iters.max() <= 100
    assert elapsed < 30.0
    report(f"heatmap: all {len(x)} disk points reach 1e-4 within {iters.max()} iters", elapsed)


def test_exact_rational_roundtrip():
    third, three4 = Fraction(1, 3), Fraction(3, 4)
    t0 = time.perf_counter()
    back = backward_G(RSState(third, three4))
    fwd = forward_F(RSState(Fraction(4, 5), Fraction(5, 12)))
    elapsed = time.perf_counter() - t0
    assert back.r == pytest.approx(0.8, rel=2**-40)
    assert back.s == pytest.approx(5 / 12, rel=2**-40)
    assert fwd.r == pytest.approx(1 / 3, rel=2**-40)
    assert fwd.s == pytest.approx(0.75, rel=2**-40)
    ctx = extended(256)
    back = backward_G(RSState(ctx.scalar(third), ctx.scalar(three4)), ctx)
    fwd = forward_F(RSState(ctx.scalar(Fraction(4, 5)), ctx.scalar(Fraction(5, 12))), ctx)
    with ctx.active():
        for got, want in ((back.r, Fraction(4, 5)), (back.s, Fraction(5, 12)),
                          (fwd.r, third), (fwd.s, three4)):
            assert abs(got - ctx.scalar(want)) <= ctx.scalar(want) * ctx.pow2(-200)
    assert elapsed < 1e-3
    report("exact rational round-trip (1/3,3/4) <-> (4/5,5/12)", elapsed)


def test_coefficient_grids():
    ctx = extended(256)
    t0 = time.perf_counter()
    c2 = check_xy_lower_bound(n=100_000, ctx=ctx, tol=1e-9)
    d1 = check_xy_band_grid(ctx, nr=200, nc=100, tol=1e-9)
    d2 = check_c_interval_grid(ctx, nr=200, nc=100, tol=1e-9)
    elapsed = time.perf_counter() - t0
    assert c2.passed, c2.info
    assert d1.passed, d1.info
    assert d2.passed, d2.info
    assert elapsed < 10.0
    report("coefficient grids: X+Y >= 5/12, second-order band, c' in [1, 5/2]", elapsed)


def test_worstcase_construction_T1000(t1000):
    (result, replay, cert), elapsed = t1000
    assert result.T_hat >= 1000
    assert 1 / 18 - 1e-6 <= cert.r0 < 0.1
    assert cert.monotone_s
    assert cert.residual_bound_ok
    assert cert.c_range_ok and cert.c_min >= 1 - 1e-6 and cert.c_max <= 2.5 + 1e-6
    assert cert.r0_floor_ok and cert.passed
    assert -2.05 <= cert.slope_estimate <= -1.95
    assert elapsed < 60.0
    report(
        f"worst-case T=1000 @2064 bits: T_hat={result.T_hat}, r0={cert.r0:.5f}, "
        f"slope={cert.slope_estimate:.4f}",
        elapsed,
    )


def test_precision_fragility(t1000):
    (result, _, _), _ = t1000
    t0 = time.perf_counter()
    hard = stable_phase_length(float(result.start.r), float(result.start.s), cap=1000)
    elapsed = time.perf_counter() - t0
    assert hard.tau < 1000
    assert elapsed < 1.0
    report(f"hardware replay loses monotonicity at t={hard.tau + 1} < 1000", elapsed)


def test_jump_characterization():
    t0 = time.perf_counter()
    res = check_jump_characterization(n_starts=1000, horizon=200, ctx=HARDWARE, seed=4)
    elapsed = time.perf_counter() - t0
    assert res.passed, res.info
    assert res.info["jumps"] > 0  # the sweep must actually exercise jumps
    assert elapsed < 10.0
    report(f"jump characterization over {res.info['transitions']} transitions", elapsed)


def test_affine_equivalence():
    inst = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1))
    verify_affine_equivalence(inst, (0.3, -0.8), T=50)  # warmup
    t0 = time.perf_counter()
    rep = verify_affine_equivalence(inst, (0.3, -0.8), T=50)
    elapsed = time.perf_counter() - t0
    assert rep.max_gap_deviation <= 1e-8
    assert rep.max_point_deviation <= 1e-8
    assert elapsed < 10e-3
    report("affine equivalence: ellipsoid diag(4,1) vs mapped ball", elapsed)


def test_bisection_heuristic():
    t0 = time.perf_counter()
    res = bisection_search(1.0, 0.4, 0.5, iters=60, cap=10_000, ctx=extended(256))
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    if res.tau < 50:
        # heuristic criterion: report, do not fail the gate
        warnings.warn(f"bisection heuristic reached only tau={res.tau} < 50")
        print(f"[acceptance] bisection heuristic: WARN (tau={res.tau})")
    else:
        report(f"bisection heuristic: tau={res.tau} >= 50", elapsed)


@pytest.mark.slow
def test_full_scale_rate_claim():
    # full-scale reproduction: gated behind `pytest -m slow`
    t0 = time.perf_counter()
    result, replay, cert = construct_and_certify(ConstructionParams(T=10_000))
    elapsed = time.perf_counter() - t0
    assert result.T_hat >= 10_000
    assert cert.passed
    assert -2.05 <= cert.slope_estimate <= -1.95
    report(
        f"full-scale T=10000: T_hat={result.T_hat}, slope={cert.slope_estimate:.4f}",
        elapsed,
    )
