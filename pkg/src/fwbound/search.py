"""Stable-phase maximization: grid search over s0 and parity-guided bisection.

The stable phase of a forward trajectory is its maximal run of nondecreasing
contraction factors.  tau uses non-strict monotonicity (s_t <= s_{t+1}); ties
are astronomically unlikely, and the non-strict form matches the printed
maximization program.  The bisection refinement is a heuristic: the parity
and stair-size observations guiding it carry no optimality guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .dynamics import DomainError, RSState, Termination, forward_F, in_M, sbar
from .numeric import HARDWARE, ScalarContext

DEFAULT_CAP = 10_000


@dataclass
class SearchResult:
    s0: float
    tau: int
    censored: bool = False           # hit the iteration cap
    precision_limited: bool = False  # bisection bracket collapsed to one scalar
    trace: Optional[list] = None     # RSState sequence over the stable phase


def stable_phase_length(
    r0, s0, cap: int = DEFAULT_CAP, ctx: ScalarContext = HARDWARE, keep_trace: bool = False
) -> SearchResult:
    """Largest k with s_0 <= s_1 <= ... <= s_k along iterated forward dynamics.

    A strict decrease or a domain exit (zero residual, map leaving M) ends
    the count; hitting the cap reports a censored value.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    r0, s0 = ctx.scalar(r0), ctx.scalar(s0)
    if not in_M(r0, s0, ctx):
        raise DomainError(f"start ({r0}, {s0}) is not in M")
    state = RSState(r0, s0)
    trace = [state] if keep_trace else None
    tau = 0
    while tau < cap:
        try:
            nxt = forward_F(state, ctx)
        except (Termination, DomainError):
            break
        if nxt.s < state.s:
            break
        state = nxt
        tau += 1
        if trace is not None:
            trace.append(state)
    return SearchResult(s0=s0, tau=tau, censored=tau >= cap, trace=trace)


def grid_search(
    r0, n: int, cap: int = DEFAULT_CAP, ctx: ScalarContext = HARDWARE
) -> list[SearchResult]:
    """tau for n uniform samples of s0 in [0, sbar(r0)] (endpoints included)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    r0 = ctx.scalar(r0)
    hi = sbar(r0, ctx)
    results = []
    with ctx.active():
        for i in range(n):
            s0 = hi * i / (n - 1)
            results.append(stable_phase_length(r0, s0, cap, ctx))
    return results


def bisection_search(
    r0, lo, hi, iters: int, cap: int = DEFAULT_CAP, ctx: ScalarContext = HARDWARE
) -> SearchResult:
    """Parity-guided bisection for a long stable phase inside [lo, hi].

    Keeps [l, m] when tau(m) and tau(u) share parity, else [m, u]; a censored
    tau has unknown parity, in which case the half whose own midpoint scores
    higher is kept.  Returns the best probe seen, with its trace.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    r0 = ctx.scalar(r0)
    lo, hi = ctx.scalar(lo), ctx.scalar(hi)
    with ctx.active():
        if not (0 <= lo < hi and hi <= sbar(r0, ctx) + ctx.tiny):
            raise DomainError(f"bracket [{lo}, {hi}] not inside [0, sbar(r0)]")

        def tau_at(s0):
            return stable_phase_length(r0, s0, cap, ctx)

        best = tau_at(lo)
        res_hi = tau_at(hi)
        if res_hi.tau > best.tau:
            best = res_hi
        precision_limited = False
        for _ in range(iters):
            mid = (lo + hi) / 2
            if not lo < mid < hi:
                precision_limited = True  # bracket narrower than one ulp
                break
            res_mid = tau_at(mid)
            if res_mid.tau > best.tau:
                best = res_mid
            if res_mid.censored or res_hi.censored:
                q_left = tau_at((lo + mid) / 2)
                q_right = tau_at((mid + hi) / 2)
                for probe in (q_left, q_right):
                    if probe.tau > best.tau:
                        best = probe
                if q_left.tau > q_right.tau:
                    hi, res_hi = mid, res_mid
                else:
                    lo = mid
            elif res_mid.tau % 2 == res_hi.tau % 2:
                hi, res_hi = mid, res_mid
            else:
                lo = mid
    final = stable_phase_length(r0, best.s0, cap, ctx, keep_trace=True)
    final.precision_limited = precision_limited
    return final
