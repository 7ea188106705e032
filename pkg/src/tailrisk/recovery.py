"""Recovery-rate distributions conditioned on the pool default rate.

Two model families are provided.  ``PointMass(r0)`` recovers a fixed fraction
r0 regardless of the default environment.  ``BetaFamily(mean_map)`` draws the
recovered fraction r from the density beta * (1-r)^(beta-1) on [0, 1], where
the exponent is tied to the conditional mean recovery m(D) at default rate D
through beta = 1/m(D) - 1 (so the mean recovery is exactly m(D), and worse
default environments can be encoded as lower means).

For each model this module exposes the loss transform toolkit used by the
rate engine: the log moment generating function of the loss 1-r,

    log_mgf(model, theta, D) = ln E[exp(theta * (1 - r))]  under rho(D, .),

its theta-derivative (the exponentially tilted mean loss), its Legendre
transform ``loss_rate_function``, the support endpoints of the loss, and both
plain and exponentially tilted samplers.

Quadrature
----------
For the beta family the MGF integral is evaluated with fixed-order
Gauss-Legendre quadrature after substituting the loss s = 1 - r by s =
u^(1/beta) (the loss CDF is s^beta, so u is uniform).  This removes the s -> 0
density singularity when beta < 1.  For beta > 1 the plain substitution leaves
an integrand u^(1/beta) with an unbounded derivative at 0, which would degrade
fixed-order accuracy, so the integral is evaluated in the further-rescaled
variable u = v^ceil(beta): the exponent of v is then in [1, 2) and the
integrand has a bounded derivative everywhere.  All weights are carried in log
space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np

from .duality import legendre_transform
from .errors import SamplingError

__all__ = [
    "MeanMap",
    "PointMass",
    "BetaFamily",
    "RecoveryModel",
    "LossSupport",
    "mean_loss",
    "log_mgf",
    "log_mgf_prime",
    "loss_rate_function",
    "support",
    "sample",
    "sample_tilted",
]

#: Largest |theta| accepted by the MGF routines (overflow guard; the log-space
#: evaluation is stable well beyond this, the cap just bounds solver brackets).
THETA_MAX = 700.0

_MEAN_MAP_KINDS = ("constant", "affine", "quadratic")


@dataclass(frozen=True)
class MeanMap:
    """Conditional mean recovery as a polynomial in the default rate D.

        m(D) = base - slope * (D - anchor) - curvature * (D - anchor)^2

    must stay strictly inside (0, 1) for every D in [0, 1]; this is checked at
    construction on a grid of step 1e-3.  ``kind`` documents which coefficients
    are in play ("constant" forces slope = curvature = 0, "affine" forces
    curvature = 0).
    """

    kind: str
    base: float
    slope: float = 0.0
    curvature: float = 0.0
    anchor: float = 0.08

    def __post_init__(self) -> None:
        if self.kind not in _MEAN_MAP_KINDS:
            raise ValueError(f"unknown mean-map kind {self.kind!r}")
        if self.kind == "constant" and (self.slope != 0.0 or self.curvature != 0.0):
            raise ValueError("constant mean map cannot carry slope or curvature")
        if self.kind == "affine" and self.curvature != 0.0:
            raise ValueError("affine mean map cannot carry curvature")
        grid = np.linspace(0.0, 1.0, 1001)
        values = self.mean_recovery(grid)
        if not (np.all(values > 0.0) and np.all(values < 1.0)):
            raise ValueError(
                "mean recovery must stay strictly inside (0, 1) on [0, 1]; "
                f"range found: [{values.min()!r}, {values.max()!r}]"
            )

    @classmethod
    def constant(cls, base: float, anchor: float = 0.08) -> "MeanMap":
        return cls("constant", base, 0.0, 0.0, anchor)

    @classmethod
    def affine(cls, base: float, slope: float, anchor: float = 0.08) -> "MeanMap":
        return cls("affine", base, slope, 0.0, anchor)

    @classmethod
    def quadratic(
        cls, base: float, slope: float, curvature: float, anchor: float = 0.08
    ) -> "MeanMap":
        return cls("quadratic", base, slope, curvature, anchor)

    def mean_recovery(self, d):
        """m(D); accepts scalars or arrays."""
        offset = np.asarray(d, dtype=float) - self.anchor
        out = self.base - self.slope * offset - self.curvature * offset * offset
        return float(out) if np.ndim(d) == 0 else out


@dataclass(frozen=True)
class PointMass:
    """Degenerate recovery: every defaulted name recovers exactly r0."""

    r0: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.r0 <= 1.0:
            raise ValueError(f"r0 must lie in [0, 1], got {self.r0!r}")


@dataclass(frozen=True)
class BetaFamily:
    """Recovery drawn from density beta*(1-r)^(beta-1), beta = 1/m(D) - 1."""

    mean_map: MeanMap
    quad_nodes: int = 64

    def __post_init__(self) -> None:
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be at least 2")

    def loss_exponent(self, d):
        """beta = f(D): the exponent of the loss CDF s^beta.  Array-safe."""
        return 1.0 / self.mean_map.mean_recovery(d) - 1.0


RecoveryModel = Union[PointMass, BetaFamily]


class LossSupport(NamedTuple):
    alpha_minus: float
    alpha_plus: float


@lru_cache(maxsize=8)
def _gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=512)
def _beta_nodes(model: BetaFamily, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Loss values and log-weights of the quadrature rule at default rate d.

    Returns (e, lw) such that E[exp(theta*(1-r))] = sum_j exp(theta*e_j + lw_j)
    up to quadrature error.  Uses the v-rescaling described in the module
    docstring so the integrand stays smooth for every exponent.
    """
    v, w = _gauss_nodes(model.quad_nodes)
    beta = model.loss_exponent(d)
    m = max(1, math.ceil(beta))
    e = v ** (m / beta)
    lw = math.log(m) + (m - 1) * np.log(v) + np.log(w)
    return e, lw


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or abs(theta) > THETA_MAX:
        raise ValueError(f"theta must be finite with |theta| <= {THETA_MAX}, got {theta!r}")
    return theta


def mean_loss(model: RecoveryModel, d: float) -> float:
    """Expected loss 1 - r at default rate d."""
    if isinstance(model, PointMass):
        return 1.0 - model.r0
    return 1.0 - model.mean_map.mean_recovery(d)


def log_mgf(model: RecoveryModel, theta: float, d: float) -> float:
    """ln E[exp(theta*(1-r))] under rho(d, .)."""
    theta = _check_theta(theta)
    if isinstance(model, PointMass):
        return theta * (1.0 - model.r0)
    if theta == 0.0:
        return 0.0
    e, lw = _beta_nodes(model, float(d))
    z = theta * e + lw
    c = z.max()
    return float(c + math.log(np.exp(z - c).sum()))


def log_mgf_prime(model: RecoveryModel, theta: float, d: float) -> float:
    """d/dtheta of log_mgf: the mean loss under the theta-tilted law."""
    theta = _check_theta(theta)
    if isinstance(model, PointMass):
        return 1.0 - model.r0
    if theta == 0.0:
        return mean_loss(model, d)
    e, lw = _beta_nodes(model, float(d))
    z = theta * e + lw
    g = np.exp(z - z.max())
    return float((g @ e) / g.sum())


def _mgf_pair(model: RecoveryModel, theta: float, d: float) -> tuple[float, float]:
    """(log_mgf, log_mgf_prime) sharing one node evaluation."""
    if isinstance(model, PointMass):
        a = 1.0 - model.r0
        return theta * a, a
    if theta == 0.0:
        return 0.0, mean_loss(model, d)
    e, lw = _beta_nodes(model, float(d))
    z = theta * e + lw
    c = z.max()
    g = np.exp(z - c)
    total = g.sum()
    return float(c + math.log(total)), float((g @ e) / total)


def _log_mgf_array(model: RecoveryModel, theta: float, d: np.ndarray) -> np.ndarray:
    """log_mgf over an array of default rates (one value per entry of d)."""
    d = np.asarray(d, dtype=float)
    if isinstance(model, PointMass):
        return np.full(d.shape, theta * (1.0 - model.r0))
    if theta == 0.0:
        return np.zeros(d.shape)
    v, w = _gauss_nodes(model.quad_nodes)
    beta = model.loss_exponent(d)
    m = np.maximum(1, np.ceil(beta))
    e = v[None, :] ** (m / beta)[:, None]
    lw = np.log(m)[:, None] + (m - 1)[:, None] * np.log(v)[None, :] + np.log(w)[None, :]
    z = theta * e + lw
    c = z.max(axis=1)
    return c + np.log(np.exp(z - c[:, None]).sum(axis=1))


def loss_rate_function(model: RecoveryModel, x: float, d: float) -> float:
    """Legendre transform sup_theta {theta*x - log_mgf(theta, d)}.

    Point mass: 0 exactly on the atom (within 1e-12), +inf elsewhere.  Beta
    family: finite on the open interval (0, 1) and +inf at and beyond the
    support endpoints (the law has no atoms, so the endpoint cost diverges).
    """
    if isinstance(model, PointMass):
        return 0.0 if abs(x - (1.0 - model.r0)) <= 1e-12 else math.inf
    if x <= 0.0 or x >= 1.0:
        return math.inf

    def f(theta: float) -> float:
        return log_mgf(model, theta, d)

    def fp(theta: float) -> float:
        return log_mgf_prime(model, theta, d)

    lo, hi = -1.0, 1.0
    while fp(hi) < x and hi < THETA_MAX:
        hi = min(2.0 * hi, THETA_MAX)
    while fp(lo) > x and lo > -THETA_MAX:
        lo = max(2.0 * lo, -THETA_MAX)
    return legendre_transform(f, fp, x, (lo, hi))


def support(model: RecoveryModel, d: float) -> LossSupport:
    """Infimum and supremum of the loss 1 - r over the support of rho(d, .)."""
    if isinstance(model, PointMass):
        a = 1.0 - model.r0
        return LossSupport(a, a)
    return LossSupport(0.0, 1.0)


def sample(model: RecoveryModel, d: float, rng: np.random.Generator, size=None):
    """Draw recovery fraction(s) from rho(d, .).

    Point masses are deterministic and consume no randomness.  The beta family
    uses the inverse CDF of the loss: s = u^(1/beta), r = 1 - s.
    """
    if isinstance(model, PointMass):
        return model.r0 if size is None else np.full(size, model.r0)
    beta = model.loss_exponent(d)
    u = rng.random(size)
    return 1.0 - u ** (1.0 / beta)


def _tilted_loss_batch(
    theta: float,
    beta: np.ndarray,
    rng: np.random.Generator,
    max_rounds: int = 10**6,
) -> np.ndarray:
    """Losses with density proportional to exp(theta*s) * beta * s^(beta-1).

    `beta` gives the exponent for each requested draw.  Rejection from the
    untilted law: a proposal s is accepted with probability exp(theta*(s - 1))
    for theta > 0 and exp(theta*s) for theta < 0 (the tilt density divided by
    its supremum over the unit interval).  One proposal per pending draw per
    round, capped at `max_rounds` attempts per draw.
    """
    beta = np.asarray(beta, dtype=float)
    if theta == 0.0:
        return rng.random(beta.shape[0]) ** (1.0 / beta)
    out = np.empty(beta.shape[0])
    pending = np.arange(beta.shape[0])
    for _ in range(max_rounds):
        if pending.size == 0:
            return out
        u = rng.random(pending.size)
        s = u ** (1.0 / beta[pending])
        accept_p = np.exp(theta * (s - 1.0)) if theta > 0.0 else np.exp(theta * s)
        accepted = rng.random(pending.size) <= accept_p
        out[pending[accepted]] = s[accepted]
        pending = pending[~accepted]
    raise SamplingError(
        f"tilted rejection sampler exceeded {max_rounds} attempts per draw "
        f"(theta={theta!r}); {pending.size} draws still pending"
    )


def sample_tilted(
    model: RecoveryModel,
    theta: float,
    d: float,
    rng: np.random.Generator,
    size=None,
):
    """Draw recovery fraction(s) with density proportional to e^{theta*(1-r)} rho(d, dr)."""
    theta = _check_theta(theta)
    if isinstance(model, PointMass):
        return model.r0 if size is None else np.full(size, model.r0)
    n = 1 if size is None else int(np.prod(size))
    beta = np.full(n, model.loss_exponent(d))
    losses = _tilted_loss_batch(theta, beta, rng)
    r = 1.0 - losses
    return float(r[0]) if size is None else r.reshape(size)
