"""Tail rate functions for pool loss levels, with the optimizing configuration.

The decay rate of P(loss rate >= ell) is computed through its variational
form: minimize, over default rates D in [ell, 1] and per-type configurations,

    sum_k w_k * [ phi_k * I_k(psi_k, D) + kl(p_k, phi_k) ]

subject to   sum_k w_k phi_k = D   and   sum_k w_k phi_k psi_k = ell,

where phi_k is the tilted default probability of type k, psi_k its conditional
mean loss, I_k the loss rate function of its recovery model, and kl the
Bernoulli relative entropy.  The inner (fixed-D) problem is convex and is
solved through its Lagrangian stationarity system,

    psi_k = M_k'(lambda1, D),
    phi_k = sigma_k(lambda2 + M_k(lambda1, D)),

with sigma_k the tilted-probability map of type k, by finding multipliers
(lambda1, lambda2) that satisfy the two linear constraints.  The solved value
equals the dual expression

    lambda1*ell + lambda2*D - sum_k w_k log_mgf_bernoulli(p_k, lambda2 + M_k),

which is what the outer one-dimensional search over D minimizes.

Minimizers describe the most likely way a loss of at least ell occurs: D* is
the most likely default rate and r* = 1 - ell/D* the implied effective average
recovery of the pool in that regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import recovery
from .duality import (
    bernoulli_kl,
    bernoulli_kl_prime,
    bernoulli_log_mgf,
    bernoulli_log_mgf_prime,
)
from .errors import ConvergenceError
from .pool import PoolSpec, max_loss
from .recovery import PointMass, loss_rate_function

__all__ = [
    "MultiplierSolution",
    "RatePoint",
    "RateCurve",
    "inner_value",
    "solve_multipliers",
    "rate_at",
    "rate_curve",
    "effective_recovery_curve",
]

#: Default-rate inset: the outer search runs over [max(ell, EPS_D), 1 - EPS_D]
#: because the multiplier map degenerates at D in {0, 1}.
EPS_D = 1e-4

#: |lambda1| beyond which an inner problem is treated as infeasible.  The tilt
#: cost at this magnitude is astronomical, so the cap never moves a minimizer.
_LAMBDA1_CAP = 600.0

_SCAN_POINTS = 200
_CONSTRAINT_TOL = 1e-9
_NEAR_MINIMUM_WINDOW = 1e-6


@dataclass(frozen=True)
class MultiplierSolution:
    """Inner-problem solution at fixed (D, ell)."""

    lambda1: float
    lambda2: float
    phi: np.ndarray
    psi: np.ndarray
    value: float


@dataclass(frozen=True)
class RatePoint:
    """Solved variational problem at one loss level.

    ``rate`` is +inf (with status "infeasible") when no default rate admits a
    configuration reaching ell; nan fields accompany special or failed points.
    ``near_minima`` lists every scanned default rate whose objective came
    within 1e-6 of the optimum, so a non-unique minimizer is observable.
    """

    ell: float
    rate: float
    d_star: float
    r_star: float
    lambda1: float
    lambda2: float
    phi: tuple[float, ...]
    psi: tuple[float, ...]
    status: str = "ok"
    near_minima: tuple[float, ...] = ()


@dataclass(frozen=True)
class RateCurve:
    points: tuple[RatePoint, ...]
    pool: PoolSpec


def inner_value(spec: PoolSpec, d: float, phi, psi) -> float:
    """Objective sum_k w_k [phi_k I_k(psi_k, d) + kl(p_k, phi_k)].

    Uses the convention 0 * inf = 0: a type with phi_k = 0 contributes only
    its entropy term and its psi_k is ignored.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    total = 0.0
    for k, t in enumerate(spec.types):
        term = bernoulli_kl(t.default_prob, float(phi[k]))
        if phi[k] > 0.0:
            rate_k = loss_rate_function(t.recovery, float(psi[k]), d)
            if math.isinf(rate_k):
                return math.inf
            term += phi[k] * rate_k
        if math.isinf(term):
            return math.inf
        total += t.weight * term
    return total


# ---------------------------------------------------------------------------
# Inner solve: multipliers (lambda1, lambda2) at fixed (D, ell)
# ---------------------------------------------------------------------------


def _type_mgfs(spec: PoolSpec, lam1: float, d: float) -> tuple[np.ndarray, np.ndarray]:
    """M_k(lam1, d) and M_k'(lam1, d) for every type."""
    pairs = [recovery._mgf_pair(t.recovery, lam1, d) for t in spec.types]
    ms = np.array([p[0] for p in pairs])
    mps = np.array([p[1] for p in pairs])
    return ms, mps


def _phi_from(spec: PoolSpec, lam2: float, ms: np.ndarray) -> np.ndarray:
    return np.array(
        [bernoulli_log_mgf_prime(t.default_prob, lam2 + ms[k]) for k, t in enumerate(spec.types)]
    )


def _residuals(
    spec: PoolSpec, lam1: float, lam2: float, d: float, ell: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ms, psi = _type_mgfs(spec, lam1, d)
    phi = _phi_from(spec, lam2, ms)
    w = spec.weights
    f = np.array([float(w @ (phi * psi)) - ell, float(w @ phi) - d])
    return f, phi, psi, ms


def _dual_value(spec: PoolSpec, lam1: float, lam2: float, d: float, ell: float, ms: np.ndarray) -> float:
    cost = sum(
        t.weight * bernoulli_log_mgf(t.default_prob, lam2 + float(ms[k]))
        for k, t in enumerate(spec.types)
    )
    return lam1 * ell + lam2 * d - cost


def _lambda2_root(spec: PoolSpec, d: float, ms: np.ndarray) -> float | None:
    """Solve sum_k w_k sigma_k(lam2 + M_k) = d for lam2 (monotone in lam2)."""
    w = spec.weights
    span = 60.0 + float(np.max(np.abs(ms)))
    lo, hi = -span, span

    def h(lam2: float) -> float:
        return float(w @ _phi_from(spec, lam2, ms)) - d

    h_lo, h_hi = h(lo), h(hi)
    if h_lo > 0.0 or h_hi < 0.0:
        return None  # d outside the reachable mean default range (degenerate p_k)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton(
    spec: PoolSpec,
    d: float,
    ell: float,
    start: tuple[float, float],
    max_iter: int = 60,
) -> tuple[np.ndarray, bool]:
    lam = np.array(start, dtype=float)
    f, *_ = _residuals(spec, lam[0], lam[1], d, ell)
    norm = float(np.abs(f).max())
    for _ in range(max_iter):
        if norm <= _CONSTRAINT_TOL * 0.01:
            return lam, True
        jac = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(lam[j]))
            bumped = lam.copy()
            bumped[j] += h
            fj, *_ = _residuals(spec, bumped[0], bumped[1], d, ell)
            jac[:, j] = (fj - f) / h
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if not math.isfinite(det) or abs(det) < 1e-300:
            return lam, norm <= _CONSTRAINT_TOL
        step = np.array(
            [
                (-f[0] * jac[1, 1] + f[1] * jac[0, 1]) / det,
                (-f[1] * jac[0, 0] + f[0] * jac[1, 0]) / det,
            ]
        )
        # Damped acceptance: backtrack until the residual norm decreases.
        t = 1.0
        accepted = False
        while t >= 2.0**-30:
            trial = lam + t * step
            if abs(trial[0]) <= _LAMBDA1_CAP * 2:
                f_trial, *_ = _residuals(spec, trial[0], trial[1], d, ell)
                trial_norm = float(np.abs(f_trial).max())
                if math.isfinite(trial_norm) and trial_norm < norm * (1.0 - 1e-4 * t) + 1e-16:
                    lam, f, norm = trial, f_trial, trial_norm
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            return lam, norm <= _CONSTRAINT_TOL
    return lam, norm <= _CONSTRAINT_TOL


def _profiled_lambda1(spec: PoolSpec, d: float, ell: float) -> tuple[float, float] | None:
    """Fallback solve by bisecting lambda1 against the ell-constraint.

    With lambda2 eliminated through its own root (the D-constraint), the
    residual sum_k w_k phi_k psi_k - ell is nondecreasing in lambda1, so a
    sign bracket at +-_LAMBDA1_CAP either pins the root or proves the loss
    level unreachable at this default rate.
    """

    def g(lam1: float) -> tuple[float, float] | None:
        ms, psi = _type_mgfs(spec, lam1, d)
        lam2 = _lambda2_root(spec, d, ms)
        if lam2 is None:
            return None
        phi = _phi_from(spec, lam2, ms)
        return float(spec.weights @ (phi * psi)) - ell, lam2

    lo, hi = -_LAMBDA1_CAP, _LAMBDA1_CAP
    g_lo, g_hi = g(lo), g(hi)
    if g_lo is None or g_hi is None:
        return None
    if g_lo[0] > 0.0:
        # Even extreme downward tilting overshoots ell: boundary case, take lo.
        return (lo, g_lo[1]) if g_lo[0] <= 1e-7 else None
    if g_hi[0] < 0.0:
        return None
    lam2_mid = g_lo[1]
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid is None:
            return None
        lam2_mid = g_mid[1]
        if g_mid[0] <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), lam2_mid


def solve_multipliers(
    spec: PoolSpec,
    d: float,
    ell: float,
    initial: tuple[float, float] | None = None,
) -> MultiplierSolution | None:
    """Multipliers for the inner problem at default rate ``d``, loss ``ell``.

    Returns None when no configuration with mean default rate d reaches mean
    loss ell (the loss level lies outside the reachable set at this d).  The
    solve ladder is a damped Newton iteration on the two constraint residuals,
    re-seeded from a coarse multiplier grid on failure, with a monotone
    profiled bisection as the guaranteed last resort.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"default rate must lie strictly inside (0, 1), got {d}")

    starts: list[tuple[float, float]] = []
    if initial is not None:
        starts.append((float(initial[0]), float(initial[1])))
    ms0, _ = _type_mgfs(spec, 0.0, d)
    lam2_cold = _lambda2_root(spec, d, ms0)
    if lam2_cold is not None:
        starts.append((0.0, lam2_cold))
    if not starts:
        return None

    for start in starts:
        lam, ok = _newton(spec, d, ell, start)
        if ok:
            return _package(spec, lam[0], lam[1], d, ell)

    # Coarse grid re-seed: pick the multiplier pair with the smallest residual.
    lam1_grid = np.linspace(-60.0, 120.0, 19)
    lam2_grid = np.linspace(-80.0, 80.0, 17)
    best, best_norm = None, math.inf
    for l1 in lam1_grid:
        for l2 in lam2_grid:
            f, *_ = _residuals(spec, float(l1), float(l2), d, ell)
            n = float(np.abs(f).max())
            if math.isfinite(n) and n < best_norm:
                best, best_norm = (float(l1), float(l2)), n
    if best is not None:
        lam, ok = _newton(spec, d, ell, best)
        if ok:
            return _package(spec, lam[0], lam[1], d, ell)

    profiled = _profiled_lambda1(spec, d, ell)
    if profiled is None:
        return None
    lam, ok = _newton(spec, d, ell, profiled)
    if ok:
        return _package(spec, lam[0], lam[1], d, ell)
    f, *_ = _residuals(spec, profiled[0], profiled[1], d, ell)
    if float(np.abs(f).max()) <= 1e-7:
        return _package(spec, profiled[0], profiled[1], d, ell)
    raise ConvergenceError(
        f"inner multiplier solve failed at d={d!r}, ell={ell!r} "
        f"(best residual {float(np.abs(f).max()):.3e})"
    )


def _package(spec: PoolSpec, lam1: float, lam2: float, d: float, ell: float) -> MultiplierSolution:
    _, phi, psi, ms = _residuals(spec, lam1, lam2, d, ell)
    value = _dual_value(spec, lam1, lam2, d, ell, ms)
    return MultiplierSolution(lambda1=lam1, lambda2=lam2, phi=phi, psi=psi, value=value)


# ---------------------------------------------------------------------------
# Outer search over the default rate
# ---------------------------------------------------------------------------

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _point_mass_common(spec: PoolSpec) -> float | None:
    """Common per-name loss 1 - r0 when every type is a point mass, else None."""
    losses = []
    for t in spec.types:
        if not isinstance(t.recovery, PointMass):
            return None
        losses.append(1.0 - t.recovery.r0)
    if max(losses) - min(losses) > 1e-12:
        return None
    return losses[0]


def _rate_point_mass_common(spec: PoolSpec, ell: float, a: float) -> RatePoint:
    """Closed-form outer solve when losses are deterministic and equal.

    The loss rate is a fixed multiple a of the default rate, so D* = ell/a and
    the problem reduces to tilting the default probabilities alone.
    """
    d = ell / a
    if d > 1.0 + 1e-12:
        return _infeasible_point(spec, ell)
    d = min(d, 1.0)
    w = spec.weights
    probs = spec.default_probs
    if d >= 1.0 - 1e-15:
        phi = np.ones_like(probs)
        lam2 = math.nan
    elif len(spec.types) == 1:
        phi = np.array([d])
        lam2 = bernoulli_kl_prime(float(probs[0]), d)
    else:
        lam2 = _lambda2_root(spec, d, np.zeros_like(probs))
        if lam2 is None:
            return _infeasible_point(spec, ell)
        phi = _phi_from(spec, lam2, np.zeros_like(probs))
    rate = float(
        sum(t.weight * bernoulli_kl(t.default_prob, float(phi[k])) for k, t in enumerate(spec.types))
    )
    return RatePoint(
        ell=ell,
        rate=rate,
        d_star=d,
        r_star=1.0 - ell / d,
        lambda1=0.0,
        lambda2=lam2,
        phi=tuple(float(x) for x in phi),
        psi=tuple(a for _ in spec.types),
        status="ok",
        near_minima=(d,),
    )


def _infeasible_point(spec: PoolSpec, ell: float) -> RatePoint:
    n = len(spec.types)
    return RatePoint(
        ell=ell,
        rate=math.inf,
        d_star=math.nan,
        r_star=math.nan,
        lambda1=math.nan,
        lambda2=math.nan,
        phi=(math.nan,) * n,
        psi=(math.nan,) * n,
        status="infeasible",
    )


def rate_at(
    spec: PoolSpec,
    ell: float,
    warm: tuple[float, float] | None = None,
) -> RatePoint:
    """Decay rate of P(pool loss rate >= ell) and its optimizing configuration.

    The outer default-rate search scans a 200-point grid over
    [max(ell, 1e-4), 1 - 1e-4] and refines the best bracket by golden-section;
    ``warm`` optionally seeds the first inner solve with multipliers from a
    neighbouring loss level.  Raises ConvergenceError only when every scanned
    default rate fails numerically; unreachable loss levels instead return an
    infeasible point with rate +inf.
    """
    if not 0.0 <= ell <= 1.0:
        raise ValueError(f"loss level must lie in [0, 1], got {ell}")
    if ell == 0.0:
        rate = float(sum(t.weight * bernoulli_kl(t.default_prob, 0.0) for t in spec.types))
        n = len(spec.types)
        return RatePoint(
            ell=0.0,
            rate=rate,
            d_star=0.0,
            r_star=math.nan,
            lambda1=math.nan,
            lambda2=math.nan,
            phi=(0.0,) * n,
            psi=(math.nan,) * n,
            status="ok",
        )
    if ell > max_loss(spec) + 1e-12:
        return _infeasible_point(spec, ell)

    common_loss = _point_mass_common(spec)
    if common_loss is not None:
        if common_loss <= 0.0:
            return _infeasible_point(spec, ell)  # ell > 0 but names cannot lose
        return _rate_point_mass_common(spec, ell, common_loss)

    d_lo = max(ell, EPS_D)
    d_hi = 1.0 - EPS_D
    if d_lo >= d_hi:
        return _infeasible_point(spec, ell)
    grid = np.linspace(d_lo, d_hi, _SCAN_POINTS)

    solutions: list[MultiplierSolution | None] = []
    values = np.full(grid.shape, math.inf)
    failures = 0
    seed = warm
    for i, d in enumerate(grid):
        try:
            sol = solve_multipliers(spec, float(d), ell, initial=seed)
        except ConvergenceError:
            failures += 1
            sol = None
        solutions.append(sol)
        if sol is not None:
            values[i] = sol.value
            seed = (sol.lambda1, sol.lambda2)

    if not np.isfinite(values).any():
        if failures:
            raise ConvergenceError(
                f"inner solve failed at every scanned default rate for ell={ell!r}"
            )
        return _infeasible_point(spec, ell)

    i0 = int(np.argmin(values))
    best_d, best_val, best_sol = float(grid[i0]), float(values[i0]), solutions[i0]
    near = tuple(float(g) for g, v in zip(grid, values) if v <= best_val + _NEAR_MINIMUM_WINDOW)

    def evaluate(d: float) -> float:
        nonlocal best_d, best_val, best_sol
        try:
            sol = solve_multipliers(spec, d, ell, initial=(best_sol.lambda1, best_sol.lambda2))
        except ConvergenceError:
            return math.inf
        if sol is None:
            return math.inf
        if sol.value < best_val:
            best_d, best_val, best_sol = d, sol.value, sol
        return sol.value

    a = float(grid[max(i0 - 1, 0)])
    b = float(grid[min(i0 + 1, len(grid) - 1)])
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1, f2 = evaluate(x1), evaluate(x2)
    while b - a > 1e-10:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = evaluate(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = evaluate(x2)

    if best_val < -1e-6:
        raise ConvergenceError(
            f"negative rate {best_val!r} at ell={ell!r}, d={best_d!r}: dual value lost convexity"
        )
    return RatePoint(
        ell=ell,
        rate=max(best_val, 0.0),
        d_star=best_d,
        r_star=1.0 - ell / best_d,
        lambda1=best_sol.lambda1,
        lambda2=best_sol.lambda2,
        phi=tuple(float(x) for x in best_sol.phi),
        psi=tuple(float(x) for x in best_sol.psi),
        status="ok",
        near_minima=near,
    )


def rate_curve(spec: PoolSpec, ell_grid, warm_start: bool = True) -> RateCurve:
    """rate_at along an increasing grid of loss levels, warm-starting each
    inner solve from its predecessor's multipliers."""
    ells = np.asarray(ell_grid, dtype=float)
    if ells.ndim != 1 or len(ells) == 0:
        raise ValueError("ell_grid must be a non-empty 1-D array")
    if np.any(np.diff(ells) <= 0.0):
        raise ValueError("ell_grid must be strictly increasing")
    points: list[RatePoint] = []
    warm: tuple[float, float] | None = None
    for ell in ells:
        point = rate_at(spec, float(ell), warm=warm if warm_start else None)
        points.append(point)
        if point.status == "ok" and math.isfinite(point.lambda1):
            warm = (point.lambda1, point.lambda2)
    return RateCurve(points=tuple(points), pool=spec)


def effective_recovery_curve(curve: RateCurve) -> list[tuple[float, float, float]]:
    """(d_star, r_star, ell) triples for the finite, solved points of a curve,
    sorted by most-likely default rate."""
    rows = [
        (p.d_star, p.r_star, p.ell)
        for p in curve.points
        if p.status == "ok" and math.isfinite(p.rate) and p.d_star > 0.0 and math.isfinite(p.r_star)
    ]
    rows.sort(key=lambda r: r[0])
    return rows

