import pytest

from fwbound import extended
from fwbound.dynamics import DomainError
from fwbound.search import bisection_search, grid_search, stable_phase_length
from fwbound.verification import check_stable_trace_bounds, check_tau_consistency


class TestStablePhaseLength:
    def test_one_rise_then_fall(self):
        # s-sequence from (1, 0.4): 0.4, 0.7071, 0.4348
        res = stable_phase_length(1.0, 0.4, cap=100)
        assert res.tau == 1 and not res.censored

    def test_boundary_start_drops_immediately(self):
        assert stable_phase_length(1.0, 0.5, cap=100).tau == 0

    def test_zero_start_exits_domain(self):
        assert stable_phase_length(1.0, 0.0, cap=100).tau == 0

    def test_censoring(self):
        res = stable_phase_length(1.0, 0.4437029626017119, cap=3, ctx=extended(256))
        assert res.tau == 3 and res.censored

    def test_domain_violation_at_start(self):
        with pytest.raises(DomainError):
            stable_phase_length(1.0, 0.7, cap=10)

    def test_trace_is_monotone_prefix(self):
        res = stable_phase_length(1.0, 0.43, cap=100, keep_trace=True)
        assert len(res.trace) == res.tau + 1
        ss = [float(st.s) for st in res.trace]
        assert ss == sorted(ss)


class TestGridSearch:
    def test_endpoints_have_small_tau(self):
        results = grid_search(1.0, n=2, cap=100)
        assert [float(r.s0) for r in results] == [0.0, 0.5]
        assert all(r.tau <= 1 for r in results)

    def test_desk_scale_peak(self):
        results = grid_search(1.0, n=10_000, cap=200)
        assert max(r.tau for r in results) >= 10

    def test_nested_grids_monotone(self):
        coarse = max(r.tau for r in grid_search(1.0, n=100, cap=200))
        fine = max(r.tau for r in grid_search(1.0, n=10_000, cap=200))
        assert fine >= coarse

    def test_requires_two_samples(self):
        with pytest.raises(ValueError):
            grid_search(1.0, n=1)


class TestBisectionSearch:
    def test_extended_long_phase(self, ctx256):
        res = bisection_search(1.0, 0.4, 0.5, iters=60, cap=10_000, ctx=ctx256)
        assert res.tau >= 50
        assert 0.44 < float(res.s0) < 0.45
        assert res.trace is not None and len(res.trace) == res.tau + 1

    def test_single_iteration_probes_three_points(self):
        res = bisection_search(1.0, 0.4, 0.5, iters=1, cap=1000)
        probes = [
            stable_phase_length(1.0, s, cap=1000).tau for s in (0.4, 0.45, 0.5)
        ]
        assert res.tau == max(probes)

    def test_hardware_precision_plateaus(self):
        res = bisection_search(1.0, 0.4, 0.5, iters=200, cap=10_000)
        assert res.precision_limited
        ext = bisection_search(1.0, 0.4, 0.5, iters=200, cap=10_000, ctx=extended(256))
        assert ext.tau > res.tau

    def test_censored_parity_falls_back_to_midpoint_probes(self):
        # cap low enough that every probe censors; the parity rule is then
        # unusable and the larger-midpoint fallback must still make progress
        res = bisection_search(1.0, 0.4, 0.5, iters=5, cap=2)
        assert res.tau == 2 and res.censored

    def test_bad_bracket(self):
        with pytest.raises(DomainError):
            bisection_search(1.0, 0.4, 0.6, iters=5)  # hi beyond sbar(1)
        with pytest.raises(ValueError):
            bisection_search(1.0, 0.4, 0.5, iters=0)


def test_tau_consistency_check():
    assert check_tau_consistency().passed


def test_stable_trace_envelope_check():
    res = check_stable_trace_bounds()
    assert res.severity == "warning"
    assert res.passed, res.info
