"""Backward-forward worst-case construction and the lower-bound certificate.

The construction walks the backward dynamics from an endpoint with residual
epsilon up to the threshold r_max, then certifies the forward replay: the
contraction factors must be nondecreasing, the residuals must dominate
r0/(1 + (8/3) r0 t), and the second-order coefficient of s = 1 - (4/3) r +
c r^2 must stay in [1, 5/2].  A passing certificate witnesses a primal gap
of order 1/t^2 along a genuine Frank-Wolfe trajectory.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .dynamics import (
    DomainError,
    DomainTag,
    RSState,
    Termination,
    backward_G,
    forward_F,
    in_M,
)
from .numeric import (
    HARDWARE,
    Mode,
    PrecisionConfig,
    ScalarContext,
    make_context,
)

R_MAX_DEFAULT = Fraction(1, 10)


def choose_epsilon(T: int) -> Fraction:
    """Terminal residual for a target horizon T: 1/(10 + (8/3) T), exactly."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    return Fraction(3, 30 + 8 * T)


def default_bits(T: int) -> int:
    # about one bit of backward error growth per iteration; factor 2 plus
    # headroom, validated by the reversibility check
    return max(256, 2 * T + 64)


@dataclass(frozen=True)
class ConstructionParams:
    T: int
    epsilon: Optional[Fraction] = None
    r_max: Fraction = R_MAX_DEFAULT
    precision: Optional[PrecisionConfig] = None

    def resolve(self) -> tuple[Fraction, Fraction, PrecisionConfig]:
        eps = Fraction(self.epsilon) if self.epsilon is not None else choose_epsilon(self.T)
        r_max = Fraction(self.r_max)
        prec = self.precision or PrecisionConfig(Mode.EXTENDED, default_bits(self.T))
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not 0 < eps <= r_max <= Fraction(1, 10):
            raise ValueError(f"need 0 < epsilon <= r_max <= 1/10, got {eps}, {r_max}")
        return eps, r_max, prec

    def to_json(self) -> dict:
        eps, r_max, prec = self.resolve()
        return {
            "T": self.T,
            "epsilon": str(eps),
            "r_max": str(r_max),
            "precision": prec.to_json(),
        }


class ConstructionError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (backward step {step})")
        self.step = step


@dataclass
class ConstructionResult:
    params: ConstructionParams
    ctx: ScalarContext
    backward: list          # RSState, endpoint first; last entry has r >= r_max
    T_hat: int              # last backward index with r < r_max

    @property
    def endpoint(self) -> RSState:
        return self.backward[0]

    @property
    def start(self) -> RSState:
        """The certified start (r0, s0): last backward state with r < r_max."""
        return self.backward[self.T_hat]

    @property
    def overshoot(self) -> Optional[RSState]:
        """First backward state with r >= r_max (None in the degenerate case)."""
        return self.backward[-1] if len(self.backward) > self.T_hat + 1 else None


def alg1_construct(params: ConstructionParams) -> ConstructionResult:
    """Backward trajectory construction from the endpoint (eps, 1 - 4eps/3 + 2eps^2).

    Iterates the backward dynamics while r < r_max.  Returns the full
    backward sequence, including the first state at or above the threshold;
    the certified start is the last state below it.  With the default
    epsilon the backward length T_hat is at least T.
    """
    eps_f, r_max_f, prec = params.resolve()
    ctx = make_context(prec)
    if ctx.mode is Mode.HARDWARE:
        warnings.warn(
            "Hardware precision cannot sustain long backward constructions; "
            "use Extended mode for horizons beyond ~40",
            stacklevel=2,
        )
    with ctx.active():
        eps = ctx.scalar(eps_f)
        r_max = ctx.scalar(r_max_f)
        state = RSState(eps, 1 - 4 * eps / 3 + 2 * eps * eps, DomainTag.MTILDE)
        backward = [state]
        guard = 8 * params.T + 4096
        while state.r < r_max:
            if len(backward) > guard:
                raise ConstructionError("backward iteration failed to reach r_max", len(backward))
            try:
                state = backward_G(state, ctx)
            except DomainError as exc:
                raise ConstructionError(f"left the backward domain: {exc}", len(backward)) from exc
            backward.append(state)
    T_hat = len(backward) - 2 if len(backward) > 1 else 0
    return ConstructionResult(params=params, ctx=ctx, backward=backward, T_hat=T_hat)


def forward_replay(start: RSState, T: int, ctx: ScalarContext = HARDWARE) -> list:
    """Iterate the forward dynamics T times from start; returns T+1 states."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    if not in_M(start.r, start.s, ctx):
        raise DomainError(f"start ({start.r}, {start.s}) is not in M")
    state = RSState(ctx.scalar(start.r), ctx.scalar(start.s), DomainTag.M)
    replay = [state]
    for t in range(T):
        try:
            state = forward_F(state, ctx)
        except (Termination, DomainError) as exc:
            raise DomainError(f"replay left the domain at step {t + 1}: {exc}") from exc
        replay.append(state)
    return replay


@dataclass
class LowerBoundCertificate:
    """Machine-checkable witnesses of the 1/t^2 lower-bound invariants."""

    r0: float
    s0: float
    T: int
    T_hat: Optional[int]
    monotone_s: bool
    residual_bound_ok: bool
    c_range_ok: bool
    c_min: float
    c_max: float
    roundtrip_max_err: float
    slope_estimate: float
    r0_floor_ok: bool
    tol_c: float
    r0_decimal: str = ""
    s0_decimal: str = ""
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.monotone_s and self.residual_bound_ok and self.c_range_ok and self.r0_floor_ok

    def to_json(self) -> dict:
        def num(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "passed": self.passed,
            "r0": self.r0,
            "s0": self.s0,
            "r0_decimal": self.r0_decimal,
            "s0_decimal": self.s0_decimal,
            "T": self.T,
            "T_hat": self.T_hat,
            "monotone_s": self.monotone_s,
            "residual_bound_ok": self.residual_bound_ok,
            "c_range_ok": self.c_range_ok,
            "c_min": num(self.c_min),
            "c_max": num(self.c_max),
            "roundtrip_max_err": num(self.roundtrip_max_err),
            "slope_estimate": num(self.slope_estimate),
            "r0_floor_ok": self.r0_floor_ok,
            "tol_c": self.tol_c,
            "failures": self.failures,
        }


def _log_slope(ts, rs) -> float:
    """Least-squares slope of log(r^2) against log(t)."""
    if len(ts) < 2:
        return float("nan")
    xs = [math.log(t) for t in ts]
    ys = [2 * math.log(float(r)) for r in rs]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx


def certify(
    start: RSState,
    replay: list,
    T: int,
    ctx: ScalarContext = HARDWARE,
    backward: Optional[list] = None,
    T_hat: Optional[int] = None,
    r_max: Fraction = R_MAX_DEFAULT,
    from_construction: bool = True,
    tol_c: Optional[float] = None,
) -> LowerBoundCertificate:
    """Check the lower-bound invariants on a forward replay.

    Monotonicity and the residual bound are checked with zero slack; the
    c-range and the r0 floor get tol_c (1e-6 Extended, 1e-3 Hardware) since
    c_t divides by r_t^2.  Failures are recorded, never raised.
    """
    if len(replay) < T + 1:
        raise ValueError(f"replay of length {len(replay)} cannot certify horizon {T}")
    if tol_c is None:
        tol_c = 1e-6 if ctx.mode is Mode.EXTENDED else 1e-3
    failures = []
    with ctx.active():
        tol = ctx.scalar(tol_c)
        r0, s0 = replay[0].r, replay[0].s
        monotone = True
        for t in range(T - 1):
            if not replay[t].s <= replay[t + 1].s:
                monotone = False
                failures.append(f"s decreases at t={t + 1}")
                break
        q = 8 * r0 / 3
        residual_ok = True
        for t in range(T + 1):
            if not replay[t].r >= r0 / (1 + q * t):
                residual_ok = False
                failures.append(f"residual bound fails at t={t}")
                break
        ten = ctx.scalar(Fraction(1, 10))
        c_lo, c_hi = 1 - tol, ctx.scalar(Fraction(5, 2)) + tol
        c_min, c_max = float("inf"), float("-inf")
        c_ok = True
        for t in range(T + 1):
            r, s = replay[t].r, replay[t].s
            if r > ten:
                continue
            c = (s - 1 + 4 * r / 3) / (r * r)
            c_min, c_max = min(c_min, float(c)), max(c_max, float(c))
            if c_ok and not c_lo <= c <= c_hi:
                c_ok = False
                failures.append(f"c_t = {float(c)} outside [1, 5/2] at t={t}")
        if math.isinf(c_min):
            c_min = c_max = float("nan")
        floor_ok = True
        if from_construction and Fraction(r_max) == R_MAX_DEFAULT:
            floor_ok = bool(r0 >= ctx.scalar(Fraction(1, 18)) - tol)
            if not floor_ok:
                failures.append(f"r0 = {float(r0)} below the 1/18 floor")
        rt_err = float("nan")
        if backward is not None and T_hat is not None:
            err = ctx.scalar(0)
            for t in range(min(T, T_hat) + 1):
                u, v = backward[T_hat - t].r, backward[T_hat - t].s
                err = max(err, abs(replay[t].r - u) / u, abs(replay[t].s - v) / v)
            rt_err = float(err)
        lo_t = max(1, T // 10)
        slope = _log_slope(range(lo_t, T + 1), [replay[t].r for t in range(lo_t, T + 1)])
    return LowerBoundCertificate(
        r0=float(r0),
        s0=float(s0),
        T=T,
        T_hat=T_hat,
        monotone_s=monotone,
        residual_bound_ok=residual_ok,
        c_range_ok=c_ok,
        c_min=c_min,
        c_max=c_max,
        roundtrip_max_err=rt_err,
        slope_estimate=slope,
        r0_floor_ok=floor_ok,
        tol_c=tol_c,
        r0_decimal=ctx.decimal(r0),
        s0_decimal=ctx.decimal(s0),
        failures=failures,
    )


def construct_and_certify(params: ConstructionParams) -> tuple[ConstructionResult, list, LowerBoundCertificate]:
    """Convenience driver: construct, replay T steps forward, certify."""
    result = alg1_construct(params)
    replay = forward_replay(result.start, params.T, result.ctx)
    cert = certify(
        result.start,
        replay,
        params.T,
        result.ctx,
        backward=result.backward,
        T_hat=result.T_hat,
        r_max=params.r_max,
    )
    return result, replay, cert
