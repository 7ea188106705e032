"""Brute-force reference computations for the acceptance tests.

Everything here deliberately bypasses the library's multiplier solver and its
scalar Legendre-transform routine.  Rate values are recomputed by direct grid
minimization over the variational variables (default rate D, per-type tilted
default probabilities phi_k, per-type conditional mean losses psi_k), with the
per-type loss rate functions tabulated by a vectorized bisection solve of
M'(theta) = psi on the raw quadrature nodes.  Slow and simple on purpose.
"""

from __future__ import annotations

import math

import numpy as np

from tailrisk.duality import bernoulli_kl
from tailrisk.pool import PoolSpec
from tailrisk.recovery import _beta_nodes

_THETA_CAP = 700.0


def kl_vec(p: float, x: np.ndarray) -> np.ndarray:
    """Bernoulli relative entropy on strictly interior arrays."""
    with np.errstate(invalid="ignore", divide="ignore"):
        out = x * np.log(x / p) + (1.0 - x) * np.log((1.0 - x) / (1.0 - p))
    return out


def conjugate_table(model, d: float, psi: np.ndarray) -> np.ndarray:
    """I(psi, d) on an interior psi grid via bisection on the tilt parameter.

    sup_theta {theta*psi - M(theta)} is attained where M'(theta) = psi; M and
    M' are evaluated directly on the quadrature nodes, so the only shared code
    with the library is the node table itself (validated separately against
    plain Monte Carlo).
    """
    e, lw = _beta_nodes(model, float(d))
    lo = np.full(psi.shape, -_THETA_CAP)
    hi = np.full(psi.shape, _THETA_CAP)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        z = mid[:, None] * e[None, :] + lw[None, :]
        g = np.exp(z - z.max(axis=1, keepdims=True))
        m_prime = (g @ e) / g.sum(axis=1)
        take = m_prime < psi
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    theta = 0.5 * (lo + hi)
    z = theta[:, None] * e[None, :] + lw[None, :]
    c = z.max(axis=1)
    m = c + np.log(np.exp(z - c[:, None]).sum(axis=1))
    return theta * psi - m


def single_type_rate_oracle(spec: PoolSpec, ell: float, d_step: float = 1e-3) -> float:
    """min over D of [kl(p, D) + D * I(ell/D, D)] for a one-type beta pool."""
    (t,) = spec.types
    best = math.inf
    for d in np.arange(max(ell, d_step), 1.0, d_step):
        psi = ell / d
        if not 0.0 < psi < 1.0:
            continue
        cost = bernoulli_kl(t.default_prob, float(d)) + d * float(
            conjugate_table(t.recovery, float(d), np.array([psi]))[0]
        )
        best = min(best, cost)
    return best


def two_type_rate_oracle(
    spec: PoolSpec,
    ell: float,
    d_step: float = 2e-3,
    grid_step: float = 1e-3,
    d_max: float = 0.9,
) -> float:
    """Nested grid minimization for a two-type beta pool.

    For each D, phi_2 and psi_2 are eliminated through the two constraints
    and the objective is evaluated on a full (phi_1, psi_1) grid, with the
    type-2 rate function linearly interpolated from its table.
    """
    t1, t2 = spec.types
    w1, w2 = t1.weight, t2.weight
    psi_grid = np.arange(grid_step, 1.0, grid_step)
    phi1 = np.arange(grid_step, 1.0, grid_step)[:, None]
    psi1 = psi_grid[None, :]
    kl1 = kl_vec(t1.default_prob, phi1)

    best = math.inf
    for d in np.arange(max(ell, d_step), d_max, d_step):
        i1 = conjugate_table(t1.recovery, float(d), psi_grid)
        i2 = conjugate_table(t2.recovery, float(d), psi_grid)
        phi2 = (d - w1 * phi1) / w2
        with np.errstate(invalid="ignore", divide="ignore"):
            psi2 = (ell - w1 * phi1 * psi1) / (w2 * phi2)
            obj = (
                w1 * (phi1 * i1[None, :] + kl1)
                + w2 * (phi2 * np.interp(psi2, psi_grid, i2) + kl_vec(t2.default_prob, phi2))
            )
        feasible = (
            (phi2 > 0.0)
            & (phi2 < 1.0)
            & (psi2 >= psi_grid[0])
            & (psi2 <= psi_grid[-1])
        )
        masked = np.where(feasible, obj, math.inf)
        best = min(best, float(np.nanmin(masked)))
    return best
