"""Vector-space Frank-Wolfe on balls and ellipsoids.

Simulation happens in the ambient space (no 2-D shortcut), so the invariant
subspace property is a genuine test.  Vectors are tuples of context scalars;
ellipsoids are handled through a symmetric eigendecomposition that works at
any precision.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .dynamics import DomainError, PolarState, Termination, check_polar, ls_gamma
from .numeric import HARDWARE, PrecisionConfig, Scalar, ScalarContext

__all__ = [
    "BallInstance",
    "EllipsoidInstance",
    "Trajectory",
    "DegenerateDirection",
    "lmo_ball",
    "short_step_gamma",
    "ls_gamma",
    "to_polar",
    "embed_polar",
    "run_fw",
    "map_to_ball",
    "verify_affine_equivalence",
    "sym_eigh",
]

EXACT_LINE_SEARCH = "exact-line-search"
SHORT_STEP = "short-step"

StepRule = Union[str, Sequence]  # rule name or an explicit stepsize schedule


class DegenerateDirection(ValueError):
    """The FW direction x - v is numerically zero."""


# ---------------------------------------------------------------------------
# small generic linear algebra (d is tiny; plain tuples beat object arrays)

def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def norm(u, ctx: ScalarContext):
    return ctx.sqrt(dot(u, u))


def axpy(a, u, v):
    """a*u + v componentwise."""
    return tuple(a * x + y for x, y in zip(u, v))


def scale(a, u):
    return tuple(a * x for x in u)


def sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def matvec(m, v):
    return tuple(dot(row, v) for row in m)


def sym_eigh(mat, ctx: ScalarContext = HARDWARE):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, V) with mat = V diag(eigenvalues) V^T and V given
    as a tuple of rows.  Quadratically convergent; sized for d up to ~20.
    """
    d = len(mat)
    with ctx.active():
        a = [[ctx.scalar(mat[i][j]) for j in range(d)] for i in range(d)]
        v = [[ctx.scalar(1) if i == j else ctx.scalar(0) for j in range(d)] for i in range(d)]
        scale_ = max(abs(a[i][j]) for i in range(d) for j in range(d))
        if scale_ == 0:
            return tuple(ctx.scalar(0) for _ in range(d)), tuple(tuple(row) for row in v)
        stop = scale_ * ctx.pow2(-(ctx.bits - 4))
        for _ in range(60 + ctx.bits // 4):
            off = max((abs(a[p][q]) for p in range(d) for q in range(p + 1, d)), default=ctx.scalar(0))
            if off <= stop:
                break
            for p in range(d):
                for q in range(p + 1, d):
                    apq = a[p][q]
                    if abs(apq) <= stop / d:
                        continue
                    tau = (a[q][q] - a[p][p]) / (2 * apq)
                    t = 1 / (abs(tau) + ctx.sqrt(1 + tau * tau))
                    if tau < 0:
                        t = -t
                    c = 1 / ctx.sqrt(1 + t * t)
                    s = t * c
                    for k in range(d):
                        akp, akq = a[k][p], a[k][q]
                        a[k][p] = c * akp - s * akq
                        a[k][q] = s * akp + c * akq
                    for k in range(d):
                        apk, aqk = a[p][k], a[q][k]
                        a[p][k] = c * apk - s * aqk
                        a[q][k] = s * apk + c * aqk
                    for k in range(d):
                        vkp, vkq = v[k][p], v[k][q]
                        v[k][p] = c * vkp - s * vkq
                        v[k][q] = s * vkp + c * vkq
        evals = tuple(a[i][i] for i in range(d))
        return evals, tuple(tuple(row) for row in v)


def _spd_power(mat, power: Fraction, ctx: ScalarContext):
    """mat^power for SPD mat via eigendecomposition; power in {1/2, -1/2, -1}."""
    d = len(mat)
    evals, v = sym_eigh(mat, ctx)
    with ctx.active():
        lam_max = max(evals)
        if min(evals) <= lam_max * ctx.scalar(1e-12):
            raise DomainError("matrix is not (numerically) symmetric positive definite")
        if power == Fraction(1, 2):
            w = [ctx.sqrt(e) for e in evals]
        elif power == Fraction(-1, 2):
            w = [1 / ctx.sqrt(e) for e in evals]
        elif power == Fraction(-1):
            w = [1 / e for e in evals]
        else:
            raise ValueError(f"unsupported power {power}")
        return tuple(
            tuple(sum(v[i][k] * w[k] * v[j][k] for k in range(d)) for j in range(d))
            for i in range(d)
        )


def _as_vector(x, ctx: ScalarContext):
    return tuple(ctx.scalar(xi) for xi in x)


def _as_matrix(m, ctx: ScalarContext):
    return tuple(tuple(ctx.scalar(e) for e in row) for row in m)


# ---------------------------------------------------------------------------
# instances

@dataclass(frozen=True)
class BallInstance:
    """Quadratic (mu R^2/2)||x/R - p||^2 over the ball of radius R.

    The model problem has ||p|| = 1 (optimizer on the boundary); rate sweeps
    also use interior (||p|| < 1) and exterior (||p|| > 1) targets.
    """

    target: tuple
    radius: Fraction | float = 1
    mu: Fraction | float = 2

    def __post_init__(self):
        object.__setattr__(self, "target", tuple(self.target))
        if len(self.target) < 2:
            raise ValueError("dimension must be at least 2")
        if not (self.radius > 0 and self.mu > 0):
            raise ValueError("radius and mu must be positive")

    @property
    def dimension(self) -> int:
        return len(self.target)

    def descriptor(self) -> dict:
        return {
            "kind": "ball",
            "dimension": self.dimension,
            "target": [float(t) for t in self.target],
            "radius": float(self.radius),
            "mu": float(self.mu),
        }


@dataclass(frozen=True)
class EllipsoidInstance:
    """Quadratic (alpha/2) x^T A x + c^T x over the ellipsoid x^T A x <= 1."""

    A: tuple
    alpha: Fraction | float
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(tuple(row) for row in self.A))
        object.__setattr__(self, "c", tuple(self.c))
        d = len(self.c)
        if len(self.A) != d or any(len(row) != d for row in self.A):
            raise ValueError("A must be d x d with d = len(c)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def dimension(self) -> int:
        return len(self.c)

    def descriptor(self) -> dict:
        return {
            "kind": "ellipsoid",
            "dimension": self.dimension,
            "A": [[float(e) for e in row] for row in self.A],
            "alpha": float(self.alpha),
            "c": [float(e) for e in self.c],
        }


Instance = Union[BallInstance, EllipsoidInstance]


# ---------------------------------------------------------------------------
# oracles and stepsizes

def lmo_ball(x, p, ctx: ScalarContext = HARDWARE):
    """Linear minimization oracle of the unit ball: -(x - p)/||x - p||."""
    x, p = _as_vector(x, ctx), _as_vector(p, ctx)
    with ctx.active():
        diff = sub(x, p)
        n = norm(diff, ctx)
        if n <= ctx.tiny:
            raise Termination("x equals the target within the context threshold")
        return scale(-1 / n, diff)


def short_step_gamma(x, v, grad, L, ctx: ScalarContext = HARDWARE):
    """min{1, <grad, x - v> / (L ||x - v||^2)}, clamped at 0 from below."""
    x, v, grad = _as_vector(x, ctx), _as_vector(v, ctx), _as_vector(grad, ctx)
    L = ctx.scalar(L)
    with ctx.active():
        if L <= 0:
            raise DomainError("L must be positive")
        d = sub(x, v)
        dd = dot(d, d)
        if ctx.sqrt(dd) <= ctx.tiny:
            raise DegenerateDirection("||x - v|| is below the context threshold")
        gamma = dot(grad, d) / (L * dd)
        return min(max(gamma, ctx.scalar(0)), ctx.scalar(1))


def to_polar(x, p, ctx: ScalarContext = HARDWARE) -> PolarState:
    """Polar state (||x - p||, <x - p, p>/||x - p||) of x relative to unit p."""
    x, p = _as_vector(x, ctx), _as_vector(p, ctx)
    with ctx.active():
        diff = sub(x, p)
        r = norm(diff, ctx)
        if r <= ctx.tiny:
            raise Termination("x equals the target within the context threshold")
        return check_polar(PolarState(r, dot(diff, p) / r), ctx)


def embed_polar(r, theta, p, ctx: ScalarContext = HARDWARE):
    """A feasible ambient point with polar state (r, theta) relative to unit p."""
    p = _as_vector(p, ctx)
    r, theta = ctx.scalar(r), ctx.scalar(theta)
    with ctx.active():
        # orthonormal q: Gram-Schmidt on the least-aligned coordinate axis
        k = min(range(len(p)), key=lambda i: abs(p[i]))
        e = tuple(ctx.scalar(1) if i == k else ctx.scalar(0) for i in range(len(p)))
        q = sub(e, scale(dot(e, p), p))
        q = scale(1 / norm(q, ctx), q)
        rad = 1 - theta * theta
        w = ctx.sqrt(rad if rad > 0 else ctx.scalar(0))
        return axpy(r * theta, p, axpy(r * w, q, p))


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """Per-iteration records of an FW run plus the instance metadata.

    Columns are aligned: s[t] = r[t+1]/r[t] and gamma[t] are None on the
    final record.  theta is None where the angle is undefined (residual at
    the termination threshold, or a non-unit target was used).
    """

    instance: Instance
    rule: str
    precision: PrecisionConfig
    t: list = field(default_factory=list)
    r: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    s: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    points: Optional[list] = None
    ctx: ScalarContext = HARDWARE

    def __len__(self) -> int:
        return len(self.t)

    def descriptor(self) -> dict:
        return {
            "instance": self.instance.descriptor(),
            "rule": self.rule,
            "precision": self.precision.to_json(),
            "length": len(self),
        }

    def to_csv(self, path) -> None:
        dec = self.ctx.decimal
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r", "theta", "s", "gamma", "gap"])
            for i in range(len(self.t)):
                w.writerow([
                    self.t[i],
                    dec(self.r[i]),
                    dec(self.theta[i]) if self.theta[i] is not None else "",
                    dec(self.s[i]) if self.s[i] is not None else "",
                    dec(self.gamma[i]) if self.gamma[i] is not None else "",
                    dec(self.gap[i]),
                ])


class _BallOps:
    def __init__(self, inst: BallInstance, ctx: ScalarContext):
        self.ctx = ctx
        self.R = ctx.scalar(inst.radius)
        self.mu = ctx.scalar(inst.mu)
        self.p = _as_vector(inst.target, ctx)
        with ctx.active():
            self.center = scale(self.R, self.p)  # R*p, the unconstrained optimum
            self.pnorm = norm(self.p, ctx)
            self.unit_target = abs(self.pnorm - 1) <= ctx.tiny
            self.phat = scale(1 / self.pnorm, self.p)
            if self.pnorm <= 1:
                self.fstar = ctx.scalar(0)
            else:
                self.fstar = (self.mu * self.R * self.R / 2) * (self.pnorm - 1) ** 2
            self.target_feasible = self.pnorm <= 1 + self.ctx.tiny

    def feasible(self, x):
        return norm(x, self.ctx) <= self.R * (1 + self.ctx.tiny)

    def grad(self, x):
        return scale(self.mu, sub(x, self.center))

    def lmo(self, g):
        n = norm(g, self.ctx)
        if n <= self.ctx.tiny:
            raise Termination("zero gradient")
        return scale(-self.R / n, g)

    def value(self, x):
        d = sub(x, self.center)
        return (self.mu / 2) * dot(d, d)

    def curvature(self, d):
        return self.mu * dot(d, d)

    def lipschitz(self):
        return self.mu

    def polar(self, x):
        # normalized residual: r = ||x/R - p||, matching gap = (mu R^2/2) r^2
        diff = scale(1 / self.R, sub(x, self.center))
        r = norm(diff, self.ctx)
        theta = dot(diff, self.phat) / r if r > 0 else None
        return r, theta


class _EllipsoidOps:
    def __init__(self, inst: EllipsoidInstance, ctx: ScalarContext):
        self.ctx = ctx
        self.alpha = ctx.scalar(inst.alpha)
        self.A = _as_matrix(inst.A, ctx)
        self.c = _as_vector(inst.c, ctx)
        self.Ainv = _spd_power(self.A, Fraction(-1), ctx)
        self.Ahalf = _spd_power(self.A, Fraction(1, 2), ctx)
        self.Aihalf = _spd_power(self.A, Fraction(-1, 2), ctx)
        with ctx.active():
            self.ptilde = scale(-1 / self.alpha, matvec(self.Aihalf, self.c))
            self.pnorm = norm(self.ptilde, ctx)
            self.unit_target = abs(self.pnorm - 1) <= ctx.tiny
            self.phat = scale(1 / self.pnorm, self.ptilde)
            base = -(self.alpha / 2) * dot(self.ptilde, self.ptilde)
            if self.pnorm <= 1:
                self.fstar = base
            else:
                self.fstar = base + (self.alpha / 2) * (self.pnorm - 1) ** 2
            self.target_feasible = self.pnorm <= 1 + self.ctx.tiny
            evals, _ = sym_eigh(self.A, ctx)
            self.lam_max = max(evals)

    def feasible(self, x):
        return dot(x, matvec(self.A, x)) <= 1 + self.ctx.tiny

    def grad(self, x):
        return axpy(self.alpha, matvec(self.A, x), self.c)

    def lmo(self, g):
        w = matvec(self.Ainv, g)
        q = dot(g, w)
        if q <= 0 or self.ctx.sqrt(q) <= self.ctx.tiny:
            raise Termination("zero gradient")
        return scale(-1 / self.ctx.sqrt(q), w)

    def value(self, x):
        return (self.alpha / 2) * dot(x, matvec(self.A, x)) + dot(self.c, x)

    def curvature(self, d):
        return self.alpha * dot(d, matvec(self.A, d))

    def lipschitz(self):
        return self.alpha * self.lam_max

    def polar(self, x):
        # mapped polar state: u = A^(1/2) x relative to ptilde
        u = matvec(self.Ahalf, x)
        diff = sub(u, self.ptilde)
        r = norm(diff, self.ctx)
        theta = dot(diff, self.phat) / r if r > 0 else None
        return r, theta


def _make_ops(instance: Instance, ctx: ScalarContext):
    if isinstance(instance, BallInstance):
        return _BallOps(instance, ctx)
    if isinstance(instance, EllipsoidInstance):
        return _EllipsoidOps(instance, ctx)
    raise TypeError(f"unsupported instance type {type(instance)!r}")


def _rule_name(rule: StepRule) -> str:
    if isinstance(rule, str):
        if rule not in (EXACT_LINE_SEARCH, SHORT_STEP):
            raise ValueError(f"unknown stepsize rule {rule!r}")
        return rule
    return "schedule"


def run_fw(
    instance: Instance,
    x0,
    rule: StepRule = EXACT_LINE_SEARCH,
    T: int = 100,
    stop_gap=0.0,
    ctx: ScalarContext = HARDWARE,
    record_points: bool = False,
) -> Trajectory:
    """Run Frank-Wolfe for up to T steps, recording polar state and primal gap.

    Halts at the horizon, at gap <= stop_gap, or at termination (the iterate
    reaches the target within the context threshold).  A schedule rule must
    cover the full horizon.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    name = _rule_name(rule)
    if name == "schedule" and len(rule) < T:
        raise ValueError(f"schedule of length {len(rule)} shorter than horizon {T}")
    ops = _make_ops(instance, ctx)
    x = _as_vector(x0, ctx)
    traj = Trajectory(
        instance=instance, rule=name, precision=ctx.config,
        points=[] if record_points else None, ctx=ctx,
    )
    with ctx.active():
        if not ops.feasible(x):
            raise DomainError("x0 is infeasible")
        stop_gap = ctx.scalar(stop_gap)
        for t in range(T + 1):
            r, theta = ops.polar(x)
            gap = ops.value(x) - ops.fstar
            terminated = ops.target_feasible and r <= ctx.tiny
            if terminated and t == 0:
                break  # started at the optimum: empty trajectory
            traj.t.append(t)
            traj.r.append(r)
            traj.theta.append(theta if not terminated else None)
            traj.gap.append(gap)
            if traj.points is not None:
                traj.points.append(x)
            if terminated or t == T or gap <= stop_gap:
                traj.s.append(None)
                traj.gamma.append(None)
                break
            g = ops.grad(x)
            try:
                v = ops.lmo(g)
            except Termination:
                traj.s.append(None)
                traj.gamma.append(None)
                break
            d = sub(x, v)
            dd = dot(d, d)
            if ctx.sqrt(dd) <= ctx.tiny:
                traj.s.append(None)  # stalled: x equals its own LMO point
                traj.gamma.append(None)
                break
            if name == EXACT_LINE_SEARCH:
                gamma = dot(g, d) / ops.curvature(d)
            elif name == SHORT_STEP:
                gamma = dot(g, d) / (ops.lipschitz() * dd)
            else:
                gamma = ctx.scalar(rule[t])
            gamma = min(max(gamma, ctx.scalar(0)), ctx.scalar(1))
            traj.gamma.append(gamma)
            x = axpy(-gamma, d, x)
            r_next, _ = ops.polar(x)
            traj.s.append(r_next / r)
    return traj


# ---------------------------------------------------------------------------
# affine reduction

def map_to_ball(inst: EllipsoidInstance, ctx: ScalarContext = HARDWARE):
    """Reduce an ellipsoid instance to the unit ball via Phi = A^(1/2).

    Returns (BallInstance, Phi).  The mapped target is -(1/alpha) A^(-1/2) c;
    a warning is issued when it is not on the unit sphere (the lower-bound
    construction needs a boundary optimizer).
    """
    ops = _EllipsoidOps(inst, ctx)
    with ctx.active():
        if abs(ops.pnorm - 1) > ctx.scalar(1e-8):
            warnings.warn(
                f"mapped target has norm {float(ops.pnorm):.6g}; "
                "boundary-optimizer instances need norm 1",
                stacklevel=2,
            )
        ball = BallInstance(target=ops.ptilde, radius=1, mu=inst.alpha)
        return ball, ops.Ahalf


@dataclass(frozen=True)
class AffineEquivalenceReport:
    steps: int
    max_gap_deviation: float
    max_point_deviation: float


def verify_affine_equivalence(
    inst: EllipsoidInstance, x0, T: int, ctx: ScalarContext = HARDWARE
) -> AffineEquivalenceReport:
    """Exact-line-search FW commutes with Phi: compare ellipsoid vs mapped ball."""
    ball, phi = map_to_ball(inst, ctx)
    with ctx.active():
        u0 = matvec(_as_matrix(phi, ctx), _as_vector(x0, ctx))
    te = run_fw(inst, x0, EXACT_LINE_SEARCH, T, ctx=ctx, record_points=True)
    tb = run_fw(ball, u0, EXACT_LINE_SEARCH, T, ctx=ctx, record_points=True)
    n = min(len(te), len(tb))
    with ctx.active():
        dgap = max((abs(te.gap[t] - tb.gap[t]) for t in range(n)), default=ctx.scalar(0))
        dpt = max(
            (norm(sub(matvec(phi, te.points[t]), tb.points[t]), ctx) for t in range(n)),
            default=ctx.scalar(0),
        )
    return AffineEquivalenceReport(n, float(dgap), float(dpt))
