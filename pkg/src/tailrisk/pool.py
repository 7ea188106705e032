"""Finite-type pool specifications, law-of-large-numbers limits, and presets.

A pool is a finite mixture of types; each type carries a weight (its fraction
of the pool), a default probability, and a recovery model.  The six bundled
presets share a common default probability of 8% and are calibrated so that
the typical default rate is 0.08 and the typical loss rate is 0.064 for every
one of them, which makes their tail behaviour directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import recovery
from .recovery import BetaFamily, MeanMap, PointMass, RecoveryModel

__all__ = [
    "TypeSpec",
    "PoolSpec",
    "LlnSummary",
    "lln",
    "preset",
    "allocate_names",
    "max_loss",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class TypeSpec:
    """One type: pool fraction, default probability, recovery model."""

    weight: float
    default_prob: float
    recovery: RecoveryModel

    def __post_init__(self) -> None:
        if not self.weight > 0.0:
            raise ValueError(f"type weight must be positive, got {self.weight!r}")
        if not 0.0 <= self.default_prob <= 1.0:
            raise ValueError(f"default_prob must lie in [0, 1], got {self.default_prob!r}")


@dataclass(frozen=True)
class PoolSpec:
    """Ordered finite mixture of types; weights must sum to 1 within 1e-12.

    Weights off by more than a few ulp are renormalized at construction, so
    downstream code can rely on them summing to 1 at machine precision.
    """

    types: tuple[TypeSpec, ...]

    def __post_init__(self) -> None:
        if not self.types:
            raise ValueError("a pool needs at least one type")
        total = math.fsum(t.weight for t in self.types)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"type weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")
        # Renormalize, but leave already-normalized pools untouched (within a
        # few ulp) so that construction is idempotent: a renormalized pool
        # written to a config file and re-parsed must come back bit-identical.
        if abs(total - 1.0) > 1e-15:
            scaled = [t.weight / total for t in self.types]
            j = min(range(len(scaled)), key=scaled.__getitem__)
            scaled[j] = 1.0 - math.fsum(w for i, w in enumerate(scaled) if i != j)
            if not scaled[j] > 0.0:
                raise ValueError("weight renormalization produced a non-positive weight")
            renormalized = tuple(
                TypeSpec(w, t.default_prob, t.recovery) for w, t in zip(scaled, self.types)
            )
            object.__setattr__(self, "types", renormalized)

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.types])

    @property
    def default_probs(self) -> np.ndarray:
        return np.array([t.default_prob for t in self.types])


class LlnSummary(NamedTuple):
    d_bar: float
    l_bar: float


def lln(spec: PoolSpec) -> LlnSummary:
    """Typical (large-pool limit) default rate and loss rate.

    Two-pass: the limiting default rate d_bar = sum_k w_k p_k is computed
    first, and every type's mean loss is then evaluated at that d_bar, because
    recoveries are conditioned on the realized pool-wide default rate.
    """
    d_bar = float(sum(t.weight * t.default_prob for t in spec.types))
    l_bar = float(
        sum(t.weight * t.default_prob * recovery.mean_loss(t.recovery, d_bar) for t in spec.types)
    )
    return LlnSummary(d_bar, l_bar)


def preset(case_id: int) -> PoolSpec:
    """The six bundled example pools (all with default probability 8%).

    1. fixed 20% recovery (point mass);
    2. beta recovery, affine conditional mean 0.2 - 0.1*(D - 0.08);
    3. beta recovery, quadratic mean 0.2 - 0.1*(D-0.08) - 0.1*(D-0.08)^2;
    4. mixture 1/3 type-2 + 2/3 type-3;
    5. mixture 1/3 affine mean 0.1 - 0.05*(D-0.08) + 2/3 quadratic mean
       0.25 - 0.1*(D-0.08) - 0.1*(D-0.08)^2;
    6. mixture 1/3 constant mean 0.1 + 2/3 constant mean 0.25 (the
       default-rate-independent counterpart of case 5).
    """
    p = 0.08
    if case_id == 1:
        return PoolSpec((TypeSpec(1.0, p, PointMass(0.2)),))
    if case_id == 2:
        return PoolSpec((TypeSpec(1.0, p, BetaFamily(MeanMap.affine(0.2, 0.1))),))
    if case_id == 3:
        return PoolSpec((TypeSpec(1.0, p, BetaFamily(MeanMap.quadratic(0.2, 0.1, 0.1))),))
    if case_id == 4:
        return PoolSpec(
            (
                TypeSpec(1.0 / 3.0, p, BetaFamily(MeanMap.affine(0.2, 0.1))),
                TypeSpec(2.0 / 3.0, p, BetaFamily(MeanMap.quadratic(0.2, 0.1, 0.1))),
            )
        )
    if case_id == 5:
        return PoolSpec(
            (
                TypeSpec(1.0 / 3.0, p, BetaFamily(MeanMap.affine(0.1, 0.05))),
                TypeSpec(2.0 / 3.0, p, BetaFamily(MeanMap.quadratic(0.25, 0.1, 0.1))),
            )
        )
    if case_id == 6:
        return PoolSpec(
            (
                TypeSpec(1.0 / 3.0, p, BetaFamily(MeanMap.constant(0.1))),
                TypeSpec(2.0 / 3.0, p, BetaFamily(MeanMap.constant(0.25))),
            )
        )
    raise ValueError(f"unknown preset case id {case_id!r}; expected 1..6")


def allocate_names(spec: PoolSpec, n: int) -> np.ndarray:
    """Deterministic allocation of n names to types by largest remainder.

    Each type gets floor(n * w_k) names; the leftover names go to the types
    with the largest fractional parts (ties broken by type order).  The result
    always sums to n exactly.
    """
    if n < 1:
        raise ValueError(f"pool size must be at least 1, got {n!r}")
    exact = n * spec.weights
    counts = np.floor(exact).astype(np.int64)
    remainder = n - int(counts.sum())
    if remainder > 0:
        fractional = exact - counts
        # argsort is stable, so equal fractional parts resolve by type order.
        order = np.argsort(-fractional, kind="stable")
        counts[order[:remainder]] += 1
    return counts


def max_loss(spec: PoolSpec) -> float:
    """Largest loss rate reachable in the large-pool limit (all names default,
    every loss at its support supremum)."""
    return float(
        sum(t.weight * recovery.support(t.recovery, 0.0).alpha_plus for t in spec.types)
    )
