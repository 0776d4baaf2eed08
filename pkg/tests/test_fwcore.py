import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from fwbound import extended
from fwbound.dynamics import DomainError, PolarState, Termination, ls_polar_step
from fwbound.fwcore import (
    EXACT_LINE_SEARCH,
    SHORT_STEP,
    BallInstance,
    DegenerateDirection,
    EllipsoidInstance,
    embed_polar,
    lmo_ball,
    ls_gamma,
    map_to_ball,
    run_fw,
    short_step_gamma,
    sym_eigh,
    to_polar,
    verify_affine_equivalence,
)
from fwbound.verification import (
    check_feasibility_and_contraction,
    check_invariant_subspace,
    check_rule_coincidence,
    check_upper_bound,
)

P = (0.0, 1.0)
SQRT2 = math.sqrt(2)


class TestLmoBall:
    def test_points_toward_target(self):
        assert lmo_ball((0, 0), P) == pytest.approx((0, 1))

    def test_normalizes(self):
        assert lmo_ball((1, 0), P) == pytest.approx((-1 / SQRT2, 1 / SQRT2))

    def test_at_target_terminates(self):
        with pytest.raises(Termination):
            lmo_ball(P, P)


class TestShortStepGamma:
    def test_orthogonal_gradient_gives_zero(self):
        assert short_step_gamma((1, 0), (0, 0), (0, 3), L=2) == 0.0

    def test_clamps_to_one(self):
        assert short_step_gamma((1, 0), (0, 0), (10, 0), L=2) == 1.0

    def test_matches_line_search_on_model_instance(self):
        x = (1.0, 0.0)
        v = lmo_ball(x, P)
        grad = (2 * (x[0] - P[0]), 2 * (x[1] - P[1]))
        g_short = short_step_gamma(x, v, grad, L=2)
        g_ls = ls_gamma(to_polar(x, P))
        assert g_short == pytest.approx(g_ls, rel=1e-14)

    def test_degenerate_direction(self):
        with pytest.raises(DegenerateDirection):
            short_step_gamma((1, 0), (1, 0), (1, 1), L=2)


class TestToPolar:
    def test_center(self):
        st = to_polar((0, 0), P)
        assert (st.r, st.theta) == (1.0, -1.0)

    def test_generic(self):
        st = to_polar((1, 0), P)
        assert st.r == pytest.approx(SQRT2, rel=1e-15)
        assert st.theta == pytest.approx(-1 / SQRT2, rel=1e-15)

    def test_antipode(self):
        st = to_polar((0, -1), P)
        assert (st.r, st.theta) == (2.0, -1.0)

    def test_at_target(self):
        with pytest.raises(Termination):
            to_polar(P, P)

    def test_embed_inverts(self):
        st = to_polar((0.3, -0.4), P)
        x = embed_polar(st.r, st.theta, P)
        assert x == pytest.approx((0.3, -0.4), abs=1e-15)


class TestRunFw:
    def test_two_step_termination_schedule(self):
        r0 = SQRT2
        traj = run_fw(BallInstance(P), (1, 0), rule=[r0 / (1 + r0), 1.0], T=2)
        assert traj.t[-1] == 2
        assert traj.gap[-1] <= 2**-40

    def test_zero_schedule_is_constant(self):
        traj = run_fw(BallInstance(P), (0.5, 0), rule=[0.0] * 5, T=5)
        assert all(r == traj.r[0] for r in traj.r)
        assert all(s == 1.0 for s in traj.s[:-1])

    def test_first_line_search_step_matches_closed_form(self):
        traj = run_fw(BallInstance(P), (1, 0), EXACT_LINE_SEARCH, T=1)
        den = (1 + SQRT2) ** 2 + 1 + 2 * (1 + SQRT2) * (-1 / SQRT2)
        assert float(traj.r[1]) ** 2 == pytest.approx(2 * 0.5 / den, rel=1e-14)
        # dual route: the scalar polar step agrees with the ambient simulation
        polar = ls_polar_step(to_polar((1, 0), P))
        assert float(traj.r[1]) == pytest.approx(polar.r, rel=1e-14)
        assert float(traj.theta[1]) == pytest.approx(polar.theta, rel=1e-14)

    def test_collinear_start_terminates_in_one_step(self):
        traj = run_fw(BallInstance(P), (0, -0.5), EXACT_LINE_SEARCH, T=10)
        assert traj.gamma[0] == pytest.approx(1.0)
        assert len(traj) == 2 and traj.gap[-1] <= 2**-52

    def test_start_at_optimum_is_empty(self):
        traj = run_fw(BallInstance(P), P, EXACT_LINE_SEARCH, T=5)
        assert len(traj) == 0

    def test_infeasible_start(self):
        with pytest.raises(DomainError):
            run_fw(BallInstance(P), (1.2, 0.5), EXACT_LINE_SEARCH, T=1)

    def test_short_schedule_rejected(self):
        with pytest.raises(ValueError):
            run_fw(BallInstance(P), (1, 0), rule=[0.5], T=3)

    def test_stop_gap(self):
        traj = run_fw(BallInstance(P), (1, 0), EXACT_LINE_SEARCH, T=500, stop_gap=1e-6)
        assert traj.gap[-1] <= 1e-6 and len(traj) < 500

    def test_interior_target_converges_geometrically(self):
        traj = run_fw(BallInstance((0.0, 0.5)), (0.8, -0.3), EXACT_LINE_SEARCH, T=120)
        gaps = [float(g) for g in traj.gap]
        for t in range(10, len(gaps) - 20):
            if gaps[t] > 1e-28:
                assert gaps[t + 20] / gaps[t] <= 0.9

    def test_exterior_target_minimizer_on_boundary(self):
        traj = run_fw(BallInstance((0.0, 2.0)), (0.5, 0.1), EXACT_LINE_SEARCH, T=300)
        assert float(traj.gap[-1]) < 1e-9  # linear convergence regime

    def test_csv_export(self, tmp_path):
        traj = run_fw(BallInstance(P), (1, 0), EXACT_LINE_SEARCH, T=3)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,r,theta,s,gamma,gap"
        assert len(lines) == len(traj) + 1
        assert lines[-1].split(",")[3] == ""  # no s on the final record


class TestSymEigh:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_numpy(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.integers(2, 6)
        m = rng.normal(size=(d, d))
        a = m + m.T
        evals, v = sym_eigh(tuple(map(tuple, a)))
        np_evals = np.linalg.eigvalsh(a)
        assert sorted(evals) == pytest.approx(sorted(np_evals), rel=1e-10, abs=1e-10)
        va = np.array(v)
        assert va @ np.diag(evals) @ va.T == pytest.approx(a, abs=1e-10)

    def test_extended_precision(self):
        ctx = extended(192)
        evals, v = sym_eigh(((2, 1), (1, 2)), ctx)
        with ctx.active():
            assert sorted(float(e) for e in evals) == pytest.approx([1.0, 3.0], rel=1e-30)


class TestMapToBall:
    def test_identity(self):
        ball, phi = map_to_ball(EllipsoidInstance(A=((1, 0), (0, 1)), alpha=1, c=(0, -1)))
        assert ball.target == pytest.approx((0, 1))
        assert np.array(phi) == pytest.approx(np.eye(2))

    def test_diagonal(self):
        ball, phi = map_to_ball(EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1)))
        assert ball.target == pytest.approx((0, 1))
        assert np.array(phi) == pytest.approx(np.diag([2, 1]))
        assert ball.mu == 1

    def test_scaled_target(self):
        # c = -2 A^(1/2) e1 gives mapped target e1 with alpha = 2
        inst = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=2, c=(-4, 0))
        ball, phi = map_to_ball(inst)
        assert ball.target == pytest.approx((1, 0))

    def test_warns_off_boundary(self):
        inst = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -0.5))
        with pytest.warns(UserWarning, match="norm"):
            map_to_ball(inst)

    def test_rejects_non_spd(self):
        with pytest.raises(DomainError):
            map_to_ball(EllipsoidInstance(A=((1, 0), (0, -1)), alpha=1, c=(0, -1)))


class TestAffineEquivalence:
    def test_identity_matches_exactly(self):
        rep = verify_affine_equivalence(
            EllipsoidInstance(A=((1, 0), (0, 1)), alpha=2, c=(0, -2)), (0.5, -0.5), T=30
        )
        assert rep.max_gap_deviation <= 1e-14
        assert rep.max_point_deviation <= 1e-14

    def test_diagonal_instance(self):
        rep = verify_affine_equivalence(
            EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1)), (0.3, -0.8), T=50
        )
        assert rep.max_gap_deviation <= 1e-8
        assert rep.max_point_deviation <= 1e-8

    def test_high_condition_number_extended(self):
        ctx = extended(256)
        inst = EllipsoidInstance(A=((1e6, 0), (0, 1)), alpha=1, c=(0, -1))
        with warnings.catch_warnings():
            warnings.simplefilter("error")  # the mapped target must be unit
            rep = verify_affine_equivalence(inst, (1e-4, -0.9), T=30, ctx=ctx)
        scale = 1e6
        assert rep.max_gap_deviation <= float(ctx.pow2(-200)) * scale
        assert rep.max_point_deviation <= float(ctx.pow2(-200)) * scale


class TestEllipsoidRun:
    def test_feasibility_and_gap_decrease(self):
        inst = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1))
        traj = run_fw(inst, (0.3, -0.8), EXACT_LINE_SEARCH, T=40, record_points=True)
        A = np.diag([4.0, 1.0])
        for pt in traj.points:
            x = np.array([float(v) for v in pt])
            assert x @ A @ x <= 1 + 1e-12
        gaps = [float(g) for g in traj.gap]
        assert all(gaps[t + 1] <= gaps[t] + 1e-15 for t in range(len(gaps) - 1))

    def test_short_step_differs_but_converges(self):
        inst = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=1, c=(0, -1))
        traj = run_fw(inst, (0.3, -0.8), SHORT_STEP, T=200)
        assert float(traj.gap[-1]) < 1e-4


def test_instance_validation():
    with pytest.raises(ValueError):
        BallInstance(target=(1.0,))
    with pytest.raises(ValueError):
        BallInstance(target=P, radius=0)
    with pytest.raises(ValueError):
        EllipsoidInstance(A=((1, 0),), alpha=1, c=(0, 1))
    with pytest.raises(ValueError):
        EllipsoidInstance(A=((1, 0), (0, 1)), alpha=0, c=(0, 1))


def test_instance_descriptors():
    assert BallInstance(P).descriptor()["kind"] == "ball"
    d = EllipsoidInstance(A=((4, 0), (0, 1)), alpha=Fraction(1), c=(0, -1)).descriptor()
    assert d["A"] == [[4.0, 0.0], [0.0, 1.0]]


def test_verification_checks_pass():
    assert check_invariant_subspace().passed
    assert check_upper_bound(30, 100).passed
    assert check_rule_coincidence().passed
    assert check_feasibility_and_contraction().passed
