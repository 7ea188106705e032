"""Finite-pool simulation and tail-probability estimation.

A pool of n names is simulated in two passes: every name's default indicator
is drawn first (independent Bernoulli per type), the realized default rate
D_N is formed, and only then are the defaulted names' recoveries drawn from
rho_k(D_N, .) — the recovery law sees the realized default environment.

Three tail estimators for P(L_N >= ell) are provided:

* ``tail_naive``       — crude Monte Carlo indicator frequency;
* ``tail_exact_pointmass`` — closed-form binomial tail for homogeneous
  point-mass pools, where the loss rate is a fixed multiple of D_N;
* ``tail_tilted``      — importance sampling under the exponentially tilted
  measure read off a solved ``RatePoint``: defaults flipped to the tilted
  probabilities phi_k, recoveries drawn from the lambda1-tilted law at the
  realized D_N, and each trial reweighted by the exact likelihood ratio
  exp(-n*(A1 + A2)) assembled in log space.

``gibbs_conditional`` reuses the tilted draws to estimate E[D_N | L_N >= ell],
which the theory sends to the most-likely default rate D*(ell).

Randomness and parallelism
--------------------------
Estimators consume trials in fixed-size chunks, each driven by its own
generator spawned from the caller's seed, so results are reproducible and
independent of the number of worker threads (capped by the TAILRISK_THREADS
environment variable; 0 or unset means one worker per CPU).  Reductions
happen in chunk order with compensated summation.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from . import recovery
from .duality import bernoulli_kl_prime, bernoulli_log_mgf
from .errors import ConfigError, InsufficientSamplesError
from .pool import PoolSpec, allocate_names
from .rates import RatePoint
from .recovery import PointMass

__all__ = [
    "SimOutcome",
    "TailEstimate",
    "simulate",
    "tail_naive",
    "tail_exact_pointmass",
    "tail_tilted",
    "gibbs_conditional",
]

_CHUNK = 16384


@dataclass(frozen=True)
class SimOutcome:
    """One simulated pool: per-type default counts and the realized rates."""

    n: int
    defaults_per_type: tuple[int, ...]
    d_n: float
    l_n: float
    log_weight: float = 0.0


@dataclass(frozen=True)
class TailEstimate:
    ell: float
    n: int
    trials: int
    p_hat: float
    std_err: float
    method: str


def _as_generator(rng) -> np.random.Generator:
    """Accept an int seed, a SeedSequence, or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(rng))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def _thread_count() -> int:
    raw = os.environ.get("TAILRISK_THREADS", "0").strip()
    try:
        requested = int(raw) if raw else 0
    except ValueError:
        raise ConfigError(f"TAILRISK_THREADS must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ConfigError(f"TAILRISK_THREADS must be >= 0, got {requested}")
    return requested if requested > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Vectorized trial batches
# ---------------------------------------------------------------------------


def _run_chunk(
    spec: PoolSpec,
    alloc: np.ndarray,
    n: int,
    trials: int,
    gen: np.random.Generator,
    probs: np.ndarray,
    theta: float,
    tilt_exponents: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Simulate `trials` pools; returns (counts, d_n, l_n, log_weight).

    `probs` are the per-type default probabilities actually sampled from
    (nominal p_k or tilted phi_k), `theta` the recovery tilt.  When
    `tilt_exponents` (the per-type Bernoulli tilts g_k) is given, per-trial
    log likelihood ratios -n*(A1 + A2) are assembled; otherwise log_weight
    is identically 0.
    """
    n_types = len(spec.types)
    counts = np.empty((n_types, trials), dtype=np.int64)
    for k in range(n_types):
        counts[k] = gen.binomial(int(alloc[k]), float(probs[k]), size=trials)
    d_n = counts.sum(axis=0) / n

    loss_sums = np.zeros(trials)
    for k, t in enumerate(spec.types):
        ck = counts[k]
        if isinstance(t.recovery, PointMass):
            loss_sums += ck * (1.0 - t.recovery.r0)
            continue
        if not ck.any():
            continue
        beta_rep = np.repeat(t.recovery.loss_exponent(d_n), ck)
        trial_idx = np.repeat(np.arange(trials), ck)
        losses = recovery._tilted_loss_batch(theta, beta_rep, gen)
        loss_sums += np.bincount(trial_idx, weights=losses, minlength=trials)
    l_n = loss_sums / n

    if tilt_exponents is None:
        return counts, d_n, l_n, np.zeros(trials)

    # A1 = theta*L_N - Lambda_{nu_N}(theta), with Lambda the empirical mixture
    # of per-type recovery log-MGFs at the realized default rate.
    lam_emp = np.zeros(trials)
    if theta != 0.0:
        for k, t in enumerate(spec.types):
            lam_emp += (counts[k] / n) * recovery._log_mgf_array(t.recovery, theta, d_n)
    a1 = theta * l_n - lam_emp
    # A2 = sum_k (def_k/n) g_k - (alloc_k/n) log_mgf_bernoulli(p_k, g_k).
    a2 = np.zeros(trials)
    for k, t in enumerate(spec.types):
        g = float(tilt_exponents[k])
        a2 += (counts[k] / n) * g - (alloc[k] / n) * bernoulli_log_mgf(t.default_prob, g)
    return counts, d_n, l_n, -n * (a1 + a2)


def _chunked(
    spec: PoolSpec,
    n: int,
    trials: int,
    rng,
    probs: np.ndarray,
    theta: float,
    tilt_exponents: np.ndarray | None,
):
    """Yield _run_chunk results over `trials` split into fixed-size chunks.

    Chunks are computed by a thread pool but yielded in chunk order, so every
    reduction downstream is deterministic for a given seed.
    """
    alloc = allocate_names(spec, n)
    sizes = [_CHUNK] * (trials // _CHUNK)
    if trials % _CHUNK:
        sizes.append(trials % _CHUNK)
    gens = _as_generator(rng).spawn(len(sizes))

    def work(args):
        size, gen = args
        return _run_chunk(spec, alloc, n, size, gen, probs, theta, tilt_exponents)

    workers = min(_thread_count(), len(sizes))
    if workers <= 1:
        for item in map(work, zip(sizes, gens)):
            yield item
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(work, zip(sizes, gens))


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def simulate(spec: PoolSpec, n: int, rng) -> SimOutcome:
    """Simulate one pool of n names under the nominal measure."""
    if n < 1:
        raise ValueError(f"pool size must be >= 1, got {n}")
    alloc = allocate_names(spec, n)
    counts, d_n, l_n, _ = _run_chunk(
        spec, alloc, n, 1, _as_generator(rng), spec.default_probs, 0.0, None
    )
    return SimOutcome(
        n=n,
        defaults_per_type=tuple(int(c) for c in counts[:, 0]),
        d_n=float(d_n[0]),
        l_n=float(l_n[0]),
        log_weight=0.0,
    )


def tail_naive(spec: PoolSpec, ell: float, n: int, trials: int, rng) -> TailEstimate:
    """Crude Monte Carlo estimate of P(L_N >= ell)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    hits = 0
    for _, _, l_n, _ in _chunked(spec, n, trials, rng, spec.default_probs, 0.0, None):
        hits += int(np.count_nonzero(l_n >= ell))
    p_hat = hits / trials
    std_err = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return TailEstimate(ell=ell, n=n, trials=trials, p_hat=p_hat, std_err=std_err, method="naive")


def tail_exact_pointmass(spec: PoolSpec, ell: float, n: int) -> TailEstimate:
    """Exact P(L_N >= ell) for homogeneous point-mass pools.

    Requires every type to be a PointMass with one common loss l0 = 1 - r0 and
    one common default probability; then L_N = l0 * D_N and the tail is the
    upper tail of Binomial(n, p), summed exactly in log space.
    """
    losses = set()
    probs = set()
    for t in spec.types:
        if not isinstance(t.recovery, PointMass):
            raise ValueError(
                "exact tail needs point-mass recoveries; "
                f"type with {type(t.recovery).__name__} recovery found"
            )
        losses.add(1.0 - t.recovery.r0)
        probs.add(t.default_prob)
    if len(losses) > 1 or len(probs) > 1:
        raise ValueError("exact tail needs a homogeneous pool (common r0 and common p)")
    l0 = losses.pop()
    p = probs.pop()

    if ell <= 0.0:
        p_exact = 1.0
    elif l0 <= 0.0:
        p_exact = 0.0
    else:
        k_min = math.ceil(n * ell / l0 - 1e-12)
        if k_min <= 0:
            p_exact = 1.0
        elif k_min > n:
            p_exact = 0.0
        elif p <= 0.0:
            p_exact = 0.0
        elif p >= 1.0:
            p_exact = 1.0
        else:
            k = np.arange(k_min, n + 1)
            log_terms = (
                gammaln(n + 1)
                - gammaln(k + 1)
                - gammaln(n - k + 1)
                + k * math.log(p)
                + (n - k) * math.log1p(-p)
            )
            p_exact = min(1.0, float(np.exp(logsumexp(log_terms))))
    return TailEstimate(ell=ell, n=n, trials=0, p_hat=p_exact, std_err=0.0, method="exact")


def _tilt_parameters(spec: PoolSpec, rate_point: RatePoint) -> tuple[np.ndarray, float, np.ndarray]:
    if rate_point.status != "ok" or not math.isfinite(rate_point.rate):
        raise ValueError(
            f"tilted sampling needs a solved finite rate point, got status "
            f"{rate_point.status!r} with rate {rate_point.rate!r}"
        )
    if len(rate_point.phi) != len(spec.types):
        raise ValueError("rate point and pool disagree on the number of types")
    theta = float(rate_point.lambda1)
    if not math.isfinite(theta):
        raise ValueError("rate point carries a non-finite recovery tilt lambda1")
    phi = np.asarray(rate_point.phi, dtype=float)
    tilts = np.empty(len(spec.types))
    for k, t in enumerate(spec.types):
        if not 0.0 < phi[k] < 1.0 or not 0.0 < t.default_prob < 1.0:
            raise ValueError(
                "tilted sampling needs interior default probabilities "
                f"(type {k}: p={t.default_prob!r}, phi={phi[k]!r})"
            )
        tilts[k] = bernoulli_kl_prime(t.default_prob, float(phi[k]))
    return phi, theta, tilts


def tail_tilted(
    spec: PoolSpec,
    ell: float,
    n: int,
    trials: int,
    rate_point: RatePoint,
    rng,
) -> TailEstimate:
    """Importance-sampling estimate of P(L_N >= ell) under the optimal tilt."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    phi, theta, tilts = _tilt_parameters(spec, rate_point)
    sum_w: list[float] = []
    sum_w2: list[float] = []
    for _, _, l_n, log_w in _chunked(spec, n, trials, rng, phi, theta, tilts):
        w = np.where(l_n >= ell, np.exp(log_w), 0.0)
        sum_w.append(float(w.sum()))
        sum_w2.append(float((w * w).sum()))
    p_hat = math.fsum(sum_w) / trials
    second = math.fsum(sum_w2) / trials
    std_err = math.sqrt(max(0.0, second - p_hat * p_hat) / trials)
    return TailEstimate(ell=ell, n=n, trials=trials, p_hat=p_hat, std_err=std_err, method="tilted")


def gibbs_conditional(
    spec: PoolSpec,
    ell: float,
    n: int,
    trials: int,
    rate_point: RatePoint,
    rng,
) -> tuple[float, float]:
    """Importance-weighted estimate of E[D_N | L_N >= ell] with its std error.

    Ratio estimator over tilted draws: numerator weights D_N * w, denominator
    weights w, with the linearized (delta-method) standard error.  Raises
    InsufficientSamplesError when no trial reaches the loss level.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    phi, theta, tilts = _tilt_parameters(spec, rate_point)
    s_y: list[float] = []
    s_z: list[float] = []
    s_yy: list[float] = []
    s_zz: list[float] = []
    s_yz: list[float] = []
    for _, d_n, l_n, log_w in _chunked(spec, n, trials, rng, phi, theta, tilts):
        z = np.where(l_n >= ell, np.exp(log_w), 0.0)
        y = d_n * z
        s_y.append(float(y.sum()))
        s_z.append(float(z.sum()))
        s_yy.append(float((y * y).sum()))
        s_zz.append(float((z * z).sum()))
        s_yz.append(float((y * z).sum()))
    z_bar = math.fsum(s_z) / trials
    if z_bar <= 0.0:
        raise InsufficientSamplesError(
            f"no trial reached loss level {ell!r} in {trials} tilted draws; "
            "cannot form the conditional estimate"
        )
    y_bar = math.fsum(s_y) / trials
    ratio = y_bar / z_bar
    resid_sq = (
        math.fsum(s_yy) / trials
        - 2.0 * ratio * math.fsum(s_yz) / trials
        + ratio * ratio * math.fsum(s_zz) / trials
    )
    std_err = math.sqrt(max(0.0, resid_sq) / trials) / z_bar
    return ratio, std_err
