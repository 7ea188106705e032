"""Bernoulli entropy / log-MGF convex-dual pair and a 1-D Legendre transform.

Conventions
-----------
Extended reals are plain floats with ``math.inf`` as the explicit infinite
value. Infinities enter only through the documented branch cases below — never
through silent overflow — so ``math.isinf`` is a reliable test for "this state
is impossible at the exponential scale".

For a reference probability p in [0, 1] and a tilted probability x:

    bernoulli_kl(p, x)            = x ln(x/p) + (1-x) ln((1-x)/(1-p))
    bernoulli_log_mgf(p, theta)   = ln(p e^theta + 1 - p)

``bernoulli_kl(p, .)`` is the relative entropy of Bernoulli(x) with respect to
Bernoulli(p); it is the Legendre-Fenchel conjugate of ``bernoulli_log_mgf(p, .)``
and vice versa.  The entropy uses the convention 0 * ln 0 = 0, which makes it
continuous on the closed interval wherever it is finite.  Outside [0, 1], and
at the incompatible corners (x=1 with p=0, x=0 with p=1), it is +inf.

``legendre_transform`` is the generic numeric conjugate sup_theta {theta*x -
f(theta)} for a smooth convex f with a derivative oracle.  It is used both to
cross-check the closed forms above and to conjugate recovery log-MGFs into
loss rate functions.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import ConvergenceError

__all__ = [
    "bernoulli_kl",
    "bernoulli_kl_prime",
    "bernoulli_log_mgf",
    "bernoulli_log_mgf_prime",
    "legendre_transform",
]


def bernoulli_kl(p: float, x: float) -> float:
    """Relative entropy of Bernoulli(x) from Bernoulli(p), +inf where undefined.

    Total on all real x: values outside [0, 1] return +inf rather than raising.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if not 0.0 <= x <= 1.0:
        return math.inf
    if p == 0.0:
        return 0.0 if x == 0.0 else math.inf
    if p == 1.0:
        return 0.0 if x == 1.0 else math.inf
    # p strictly interior from here on; 0*ln 0 = 0 at the edges.
    if x == 0.0:
        return -math.log1p(-p)
    if x == 1.0:
        return -math.log(p)
    return x * math.log(x / p) + (1.0 - x) * math.log((1.0 - x) / (1.0 - p))


def bernoulli_kl_prime(p: float, x: float) -> float:
    """d/dx of bernoulli_kl: ln( x(1-p) / ((1-x)p) ).  Requires interior p, x."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    if not 0.0 < x < 1.0:
        raise ValueError(f"x must lie strictly inside (0, 1), got {x!r}")
    return math.log(x) - math.log1p(-x) + math.log1p(-p) - math.log(p)


def bernoulli_log_mgf(p: float, theta: float) -> float:
    """ln(p e^theta + 1 - p), stable for arbitrarily large |theta|.

    For theta > 0 the computation is theta + ln(1 + (1-p)(e^{-theta} - 1)), so
    the exponential never overflows; the mirrored form is used for theta <= 0.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0 or theta == 0.0:
        return 0.0
    if p == 1.0:
        return theta
    if theta > 0.0:
        return theta + math.log1p((1.0 - p) * math.expm1(-theta))
    return math.log1p(p * math.expm1(theta))


def bernoulli_log_mgf_prime(p: float, theta: float) -> float:
    """p e^theta / (p e^theta + 1 - p): the tilted success probability in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if theta > 0.0:
        out = p / (p + (1.0 - p) * math.exp(-theta))
    else:
        pe = p * math.exp(theta)
        out = pe / (pe + 1.0 - p)
    # Guard rounding just outside [0, 1]; the exact value is always a probability.
    return min(1.0, max(0.0, out))


def legendre_transform(
    f: Callable[[float], float],
    f_prime: Callable[[float], float],
    x: float,
    bracket: tuple[float, float] = (-700.0, 700.0),
    *,
    max_iter: int = 200,
    tol: float = 1e-12,
) -> float:
    """sup over theta in `bracket` of theta*x - f(theta), for convex smooth f.

    The supremum is located by solving f'(theta) = x with bracketed bisection
    accelerated by secant (Newton-style) steps; f' must be nondecreasing on the
    bracket.  If x falls outside the closed range of f' over the bracket the
    transform is +inf; if it sits on the boundary of that range (within `tol`)
    the limiting endpoint value is returned.

    Raises ConvergenceError — carrying the best bracket found — if the residual
    tolerance is not met within `max_iter` iterations and the bracket has not
    collapsed to floating-point width.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"bracket must satisfy lo < hi, got {bracket!r}")

    g_lo = f_prime(lo) - x
    g_hi = f_prime(hi) - x
    if g_lo > 0.0:  # x below the attainable derivative range
        return lo * x - f(lo) if g_lo <= tol else math.inf
    if g_hi < 0.0:  # x above the attainable derivative range
        return hi * x - f(hi) if -g_hi <= tol else math.inf

    a, b = lo, hi
    g_a, g_b = g_lo, g_hi
    # Current iterate = the bracket end with the smaller residual.
    if abs(g_a) <= abs(g_b):
        theta, g_theta, prev_theta, prev_g = a, g_a, b, g_b
    else:
        theta, g_theta, prev_theta, prev_g = b, g_b, a, g_a

    for _ in range(max_iter):
        if abs(g_theta) <= tol:
            return theta * x - f(theta)
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            # Bracket at floating-point resolution: theta is as good as it gets.
            return theta * x - f(theta)
        denom = g_theta - prev_g
        if denom != 0.0:
            cand = theta - g_theta * (theta - prev_theta) / denom
        else:
            cand = 0.5 * (a + b)
        if not a < cand < b:
            cand = 0.5 * (a + b)
        g_cand = f_prime(cand) - x
        if not math.isfinite(g_cand):
            raise ConvergenceError(
                f"derivative oracle returned non-finite value at theta={cand!r}",
                bracket=(a, b),
            )
        if g_cand <= 0.0:
            a, g_a = cand, g_cand
        else:
            b, g_b = cand, g_cand
        prev_theta, prev_g = theta, g_theta
        theta, g_theta = cand, g_cand

    raise ConvergenceError(
        f"no root of f'(theta) = {x!r} to tolerance {tol!r} in {max_iter} iterations",
        bracket=(a, b),
    )
