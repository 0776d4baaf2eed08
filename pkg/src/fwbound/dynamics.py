"""Scalar dynamical systems of the unit-ball model problem.

Three coupled views of the same trajectory:

* polar coordinates (r, theta) of an iterate relative to the target, with the
  generic step and the exact-line-search step in closed form;
* the forward map F on contraction pairs (r, s), s = r_next/r, on domain M;
* the backward map G on the restricted domain Mtilde, inverting F on the
  branch with denominator X + Y.

All functions are pure and generic over a ScalarContext.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .numeric import HARDWARE, Scalar, ScalarContext


class DomainError(ValueError):
    """Input lies outside the operation's domain beyond the slack tolerance."""


class Termination(Exception):
    """The trajectory reached the target: residual below the context threshold."""


class DomainTag(enum.Enum):
    M = "M"
    MTILDE = "Mtilde"
    UNCHECKED = "unchecked"


@dataclass(frozen=True)
class PolarState:
    """(r, theta): residual magnitude and cosine of the angle at the target.

    Feasible states satisfy 0 < r <= 2 and -1 <= theta <= -r/2; r = 0 means
    termination and is represented separately (None results / Termination).
    """

    r: Scalar
    theta: Scalar


@dataclass(frozen=True)
class RSState:
    """(r, s): residual and contraction factor, the state of the maps F and G."""

    r: Scalar
    s: Scalar
    tag: DomainTag = DomainTag.UNCHECKED


def sbar(r, ctx: ScalarContext = HARDWARE) -> Scalar:
    """Upper boundary of M: 1/(1+r) on (0,1], sqrt((2-r)/4) on (1,2]."""
    r = ctx.scalar(r)
    with ctx.active():
        if not 0 < r <= 2:
            raise DomainError(f"sbar requires 0 < r <= 2, got {r}")
        if r <= 1:
            return 1 / (1 + r)
        q = (2 - r) / 4
        return ctx.sqrt(q if q > 0 else ctx.scalar(0))


def in_M(r, s, ctx: ScalarContext = HARDWARE) -> bool:
    r, s = ctx.scalar(r), ctx.scalar(s)
    with ctx.active():
        slack = ctx.tiny
        if not (0 < r <= 2 + slack):
            return False
        return -slack <= s <= sbar(min(r, ctx.scalar(2)), ctx) + slack


def in_Mtilde(r, s, ctx: ScalarContext = HARDWARE) -> bool:
    r, s = ctx.scalar(r), ctx.scalar(s)
    with ctx.active():
        slack = ctx.tiny
        if not (0 < r <= ctx.scalar(Fraction(1, 3)) + slack):
            return False
        return -slack <= s <= 1 / (1 + r) + slack


def _clamp_radicand(q, ctx):
    """Tiny negative radicands are boundary roundoff; larger ones are errors."""
    if q >= 0:
        return q
    if q >= -ctx.tiny:
        return ctx.scalar(0)
    raise DomainError(f"negative radicand beyond slack: {q}")


def _clamp_theta(r, theta, ctx):
    upper = -r / 2
    if theta > upper:
        if theta > upper + ctx.tiny:
            raise DomainError(f"theta {theta} violates feasibility bound {upper}")
        return upper
    if theta < -1:
        if theta < -1 - ctx.tiny:
            raise DomainError(f"theta {theta} below -1")
        return ctx.scalar(-1)
    return theta


def check_polar(state: PolarState, ctx: ScalarContext = HARDWARE) -> PolarState:
    r, theta = ctx.scalar(state.r), ctx.scalar(state.theta)
    with ctx.active():
        if not 0 < r <= 2 + ctx.tiny:
            raise DomainError(f"r must lie in (0, 2], got {r}")
        return PolarState(r, _clamp_theta(r, theta, ctx))


def ls_gamma(state: PolarState, ctx: ScalarContext = HARDWARE) -> Scalar:
    """Exact line-search stepsize; equals 1 iff theta = -1 (collinear)."""
    state = check_polar(state, ctx)
    r, th = state.r, state.theta
    with ctx.active():
        den = (1 + r) ** 2 + 1 + 2 * (1 + r) * th
        gamma = r * (1 + r + th) / den
        return min(gamma, ctx.scalar(1))


def polar_step(state: PolarState, gamma, ctx: ScalarContext = HARDWARE) -> Optional[PolarState]:
    """One FW step in polar coordinates; None when the step lands on the target."""
    state = check_polar(state, ctx)
    gamma = ctx.scalar(gamma)
    r, th = state.r, state.theta
    with ctx.active():
        if not -ctx.tiny <= gamma <= 1 + ctx.tiny:
            raise DomainError(f"stepsize must lie in [0, 1], got {gamma}")
        a = (1 - gamma) * r - gamma
        r2sq = _clamp_radicand(a * a - 2 * gamma * a * th + gamma * gamma, ctx)
        r2 = ctx.sqrt(r2sq)
        if r2 <= ctx.tiny:
            return None
        th2 = (a * th - gamma) / r2
        return PolarState(r2, _clamp_theta(r2, th2, ctx))


def ls_polar_step(state: PolarState, ctx: ScalarContext = HARDWARE) -> Optional[PolarState]:
    """Exact-line-search step in closed form: r and theta updates without gamma."""
    state = check_polar(state, ctx)
    r, th = state.r, state.theta
    with ctx.active():
        den = (r + 1) ** 2 + 2 * (r + 1) * th + 1
        r2sq = _clamp_radicand(r * r * (1 - th * th), ctx) / den
        r2 = ctx.sqrt(r2sq)
        if r2 <= ctx.tiny:
            return None
        th2 = -((r + 1) / r) * r2
        return PolarState(r2, _clamp_theta(r2, th2, ctx))


def forward_F(state: RSState, ctx: ScalarContext = HARDWARE) -> RSState:
    """Forward contraction dynamics F(r, s) = (rs, s'); maps M into M.

    Raises Termination when rs falls below the context threshold (the next
    residual is zero: the underlying FW run has converged).
    """
    r, s = ctx.scalar(state.r), ctx.scalar(state.s)
    if not in_M(r, s, ctx):
        raise DomainError(f"({r}, {s}) is not in M")
    with ctx.active():
        r2 = r * s
        if r2 <= ctx.tiny:
            raise Termination("contraction factor reached zero residual")
        num = _clamp_radicand(1 - (1 + r) ** 2 * s * s, ctx)
        den = 2 - 2 * s - (2 + r) * r * s * s
        return RSState(r2, ctx.sqrt(num / den), DomainTag.M)


def backward_G(state: RSState, ctx: ScalarContext = HARDWARE, alternate_branch: bool = False) -> RSState:
    """Backward dynamics G(r, s) = (r/(X+Y), X+Y) on Mtilde; F(G(r, s)) = (r, s).

    The X - Y root is the other preimage of F; it is exposed behind
    ``alternate_branch`` only and comes back untagged (no domain claims).
    """
    r, s = ctx.scalar(state.r), ctx.scalar(state.s)
    if not in_Mtilde(r, s, ctx):
        raise DomainError(f"({r}, {s}) is not in Mtilde")
    with ctx.active():
        X = (1 + r) * s * s - r
        Y = ctx.sqrt(_clamp_radicand((1 - s * s) * (1 - (1 + r) ** 2 * s * s), ctx))
        den = X - Y if alternate_branch else X + Y
        if den <= 0:
            raise DomainError(f"backward branch denominator not positive: {den}")
        tag = DomainTag.UNCHECKED if alternate_branch else DomainTag.M
        return RSState(r / den, den, tag)


def reconstruct_theta(state: RSState, ctx: ScalarContext = HARDWARE) -> Scalar:
    """Angle theta of a feasible point whose exact-line-search contraction is s."""
    r, s = ctx.scalar(state.r), ctx.scalar(state.s)
    if not in_M(r, s, ctx):
        raise DomainError(f"({r}, {s}) is not in M")
    with ctx.active():
        rad = _clamp_radicand((s * s - 1) * (s * s * (1 + r) ** 2 - 1), ctx)
        theta = -s * s * (r + 1) - ctx.sqrt(rad)
        return _clamp_theta(r, theta, ctx)


def r1_of_s(s, ctx: ScalarContext = HARDWARE) -> Scalar:
    """Residual at which the contraction factor s is stationary (s' = s)."""
    s = ctx.scalar(s)
    with ctx.active():
        if not 0 < s <= 1:
            raise DomainError(f"r1_of_s requires s in (0, 1], got {s}")
        return -1 + ctx.sqrt(1 - (2 * s * s - s - 1) / (s * s * (s + 1)))


_G_BRACKET_LO = "0.49"  # r1 is monotone decreasing on s in [0.49, 1]


def threshold_g(r, ctx: ScalarContext = HARDWARE) -> Scalar:
    """Monotonicity threshold g(r): the s in (0.49, 1] with r1(s) = r, by bisection.

    Satisfies g(r) = 1 - (4/3) r + O(r^2) for small r.
    """
    r = ctx.scalar(r)
    with ctx.active():
        lo = ctx.scalar(_G_BRACKET_LO)
        hi = ctx.scalar(1)
        if not 0 < r <= r1_of_s(lo, ctx):
            raise DomainError(f"r outside the invertible range (0, {r1_of_s(lo, ctx)}]")
        for _ in range(ctx.bits + 2):
            mid = (lo + hi) / 2
            if r1_of_s(mid, ctx) > r:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def monotone_condition(state: RSState, ctx: ScalarContext = HARDWARE) -> bool:
    """True iff s_t >= s_{t-1}, i.e. the backward step decreases the contraction."""
    r, s = ctx.scalar(state.r), ctx.scalar(state.s)
    with ctx.active():
        if not (r > 0 and 0 <= s < 1):
            raise DomainError(f"monotone_condition requires r > 0 and s in [0, 1), got ({r}, {s})")
        return (1 + s) * r * (2 * s + r) >= (1 - s) * (2 * s + 1)


def check_jump_precondition(r_t, s_t, s_next, ctx: ScalarContext = HARDWARE) -> bool:
    """Jump characterization: s_next < 1/2 implies s_t > 1/(1+r_t)^2.

    Vacuously true when s_next >= 1/2; returns False only for triples that
    violate the implication (which no true trajectory does).
    """
    r_t, s_t, s_next = ctx.scalar(r_t), ctx.scalar(s_t), ctx.scalar(s_next)
    with ctx.active():
        if s_next >= ctx.scalar(Fraction(1, 2)):
            return True
        return s_t > 1 / (1 + r_t) ** 2
