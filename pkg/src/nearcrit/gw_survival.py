"""Survival probability of near-critical Galton–Watson processes.

The survival probability ``rho`` of a branching process with offspring law
``X`` solves ``1 - rho = E (1 - rho)**X``.  We solve it by bisection on
``rho`` directly, writing the fixed-point function as

    F(r) = r - E[1 - (1 - r)**X]

which is computed term by term with ``expm1``/``log1p`` so that it keeps full
relative precision even when ``rho`` and ``mean - 1`` are tiny.  ``F`` is
concave with ``F(0) = 0``, negative just right of 0 when the mean exceeds 1,
and ``F(1) = P(X=0) >= 0``, so the bracket ``(0, 1]`` always holds exactly one
root.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .degree_model import (
    OffspringDistribution,
    as_distribution,
    critical_mixture,
    power_law_degree_law,
    size_biased,
    truncated_family,
)
from .errors import (
    DegenerateOffspringError,
    InsufficientDataError,
    InvalidParameterError,
)

MIN_ITERATIONS = 64
MAX_ITERATIONS = 4000


@dataclass(frozen=True)
class SurvivalSolution:
    rho: float
    alpha: float
    residual: float
    iterations: int
    bracket: float


def _survival_gap(k: np.ndarray, p: np.ndarray, r: float) -> float:
    """``r - E[1 - (1-r)^X]``, accurate for small ``r``."""
    if r >= 1.0:
        return 1.0 - math.fsum(p[k > 0])
    hit = -np.expm1(k * math.log1p(-r))
    return -math.fsum(np.append(p * hit, -r))


def fixed_point_gap(dist, q: float) -> float:
    """``E q^X - q`` evaluated through the survival parametrisation ``r = 1 - q``."""
    d = as_distribution(dist)
    return _survival_gap(d.support.astype(float), d.probs, 1.0 - q)


def solve_rho(dist) -> SurvivalSolution:
    """Survival probability of the branching process with offspring law ``dist``."""
    d = as_distribution(dist)
    if d.support.size == 1 and d.support[0] == 1:
        raise DegenerateOffspringError("X = 1 almost surely: every q is a fixed point")
    if d.eps <= 0:
        return SurvivalSolution(0.0, 0.0, 0.0, 0, 0.0)
    k = d.support.astype(float)
    p = d.probs
    lo, hi = 0.0, 1.0
    it = 0
    while it < MAX_ITERATIONS:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _survival_gap(k, p, mid) < 0:
            lo = mid
        else:
            hi = mid
        it += 1
        if it >= MIN_ITERATIONS and hi - lo <= 1e-15 * hi:
            break
    rho = hi if lo == 0.0 else 0.5 * (lo + hi)
    residual = abs(_survival_gap(k, p, rho))
    alpha = math.inf if rho >= 1 else -math.log1p(-rho)
    return SurvivalSolution(rho, alpha, residual, it, hi - lo)


def phi(x):
    """``exp(-x) - 1 + x``; a short series is used below 1e-3."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    with np.errstate(over="ignore"):
        direct = np.expm1(-x) + x
    xs = np.where(small, x, 0.0)
    series = xs * xs * (0.5 - xs * (1 / 6 - xs * (1 / 24 - xs / 120)))
    out = np.where(small, series, direct)
    return out.item() if out.ndim == 0 else out


def lower_bound(dist) -> float:
    """``2 eps / E X(X-1)``, a lower bound for the survival probability."""
    d = as_distribution(dist)
    eps = d.eps
    if eps <= 0:
        raise InvalidParameterError("lower bound needs mean > 1")
    fm2 = d.factorial_moment2
    if fm2 <= 0:
        raise DegenerateOffspringError("E X(X-1) = 0 with mean > 1 is impossible")
    return 2 * eps / fm2


def balance_ratio(dist, rho: float) -> float:
    """``eps / E[min(X, rho X^2)]``; stays in a fixed band along a near-critical family."""
    if not 0 < rho < 1:
        raise InvalidParameterError("rho must lie in (0, 1)")
    d = as_distribution(dist)
    return d.eps / d.expect(lambda k: np.minimum(k, rho * k * k))


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtinctionEstimate:
    estimate: float
    stderr: float
    trials: int
    survived: int
    undecided: int


def _run_batch(d: OffspringDistribution, trials, generation_cap, population_cap, rng):
    support = d.support
    probs = d.probs
    z = np.ones(trials, dtype=np.int64)
    survived = 0
    for _ in range(generation_cap):
        if z.size == 0:
            break
        counts = rng.multinomial(z, probs)
        z = counts @ support
        big = z > population_cap
        survived += int(big.sum())
        z = z[(z > 0) & ~big]
    return survived, int(z.size)


def mc_extinction(dist, trials: int, generation_cap: int = 10_000, population_cap: int = 10_000,
                  rng=None, batch_size: int = 10_000, workers: int = 1) -> ExtinctionEstimate:
    """Estimate the survival probability by direct simulation.

    A trial counts as surviving once its population exceeds
    ``population_cap``.  Trials still alive and below the cap after
    ``generation_cap`` generations are also counted as surviving and
    reported in ``undecided``.  Batches of trials use independent child
    streams spawned from ``rng``.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    d = as_distribution(dist)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    sizes = [batch_size] * (trials // batch_size)
    if trials % batch_size:
        sizes.append(trials % batch_size)
    streams = rng.spawn(len(sizes))
    jobs = list(zip(sizes, streams))

    def work(job):
        return _run_batch(d, job[0], generation_cap, population_cap, job[1])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    survived = sum(r[0] for r in results)
    undecided = sum(r[1] for r in results)
    hits = survived + undecided
    est = hits / trials
    return ExtinctionEstimate(est, math.sqrt(est * (1 - est) / trials), trials, hits, undecided)


# ---------------------------------------------------------------------------
# Regimes
# ---------------------------------------------------------------------------

REGIMES = (
    "subcritical",
    "bounded-second-moment",
    "convergent-second-moment",
    "infinite-limit-second-moment",
    "bounded-max",
    "power-law",
)


@dataclass
class RegimePrediction:
    """Classification of a family of offspring laws indexed by ``n``.

    ``predicted_rho`` is a float when the regime gives an asymptotic
    equivalent and a ``(lower, upper)`` pair when it only fixes the order of
    magnitude; the upper end of a pair is ``envelope_factor`` times the
    order-of-magnitude scale.
    """

    regime: str
    predicted_rho: float | tuple[float, float]
    lower_bound: float
    flags: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def upper(self) -> float:
        if isinstance(self.predicted_rho, tuple):
            return self.predicted_rho[1]
        return self.predicted_rho


def tail_exponent(dist, xmin: float = 10.0, xmax: float | None = None) -> tuple[float, float]:
    """Least-squares fit of ``log P(X > x)`` against ``log x``.

    Returns ``(beta, r2)`` where the fitted tail is ``x**-beta``.
    """
    d = as_distribution(dist)
    xmax = d.max_support / 10 if xmax is None else xmax
    if xmax <= xmin * 10:
        raise InsufficientDataError("support too short for a tail fit")
    grid = np.geomspace(xmin, xmax, 40)
    cum = np.cumsum(d.probs[::-1])[::-1]  # P(X >= support[i])
    idx = np.searchsorted(d.support, grid, side="right")
    tail = np.where(idx < d.support.size, cum[np.minimum(idx, d.support.size - 1)], 0.0)
    if np.any(tail <= 0):
        raise InsufficientDataError("empty tail inside fit range")
    x, y = np.log(grid), np.log(tail)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1 - resid.var() / y.var() if y.var() > 0 else 0.0
    return -slope, r2


def classify_regime(family: Mapping[int, OffspringDistribution], envelope_factor: float = 10.0,
                    solve: bool = True) -> RegimePrediction:
    """Decide which survival-probability asymptotics apply to a family of laws.

    The decision uses finite-``n`` trends only:

    * ``E X^2`` bounded across the grid (growth below 2x);
    * the share of ``E X_n^2`` carried by atoms beyond the previous law's
      maximum (uniform integrability proxy), and the same second moment
      restricted to those atoms ("bulk");
    * ``eps Delta / E X^2`` tending to zero;
    * a clean power-law tail with exponent in (1, 2).

    Whenever the diagnostics do not single out one part of the theory the
    weakest envelope ``(lower bound, envelope_factor * eps)`` is returned
    with a ``conflict`` flag.
    """
    ns = sorted(family)
    if len(ns) < 3:
        raise InsufficientDataError("need laws for at least three values of n")
    laws = [as_distribution(family[n]) for n in ns]
    eps = [d.eps for d in laws]
    diag: dict = {"n": ns, "eps": eps}
    last = laws[-1]
    if eps[-1] <= 0 or any(e <= 0 for e in eps):
        return RegimePrediction("subcritical", 0.0, 0.0, ["subcritical"], diag)

    m2 = [d.second_moment for d in laws]
    fm2 = [d.factorial_moment2 for d in laws]
    delta = [d.max_support for d in laws]
    maxcrit = [e * D / s for e, D, s in zip(eps, delta, m2)]
    tail_share, bulk = [], []
    for prev, d in zip(laws[:-1], laws[1:]):
        k = d.support.astype(float)
        beyond = d.support > prev.max_support
        tail_share.append(math.fsum(k[beyond] ** 2 * d.probs[beyond]) / d.second_moment)
        bulk.append(math.fsum(k[~beyond] ** 2 * d.probs[~beyond]))
    diag.update(m2=m2, fm2=fm2, delta=delta, eps_delta_over_m2=maxcrit,
                tail_share=tail_share, bulk_m2=bulk)
    if solve:
        rho = [solve_rho(d).rho for d in laws]
        diag["rho"] = rho
        diag["rho_over_eps"] = [r / e for r, e in zip(rho, eps)]

    e, lb = eps[-1], lower_bound(last)
    bounded = m2[-1] / m2[0] < 2
    ui = tail_share[-1] < 0.05
    bulk_grows = bulk[-1] / bulk[0] > 2
    max_small = maxcrit[-1] < 0.1 and maxcrit[-1] < maxcrit[0]
    beta = None
    if last.max_support >= 1e4:
        try:
            b, r2 = tail_exponent(last)
            if r2 > 0.98 and 1 < b < 2:
                beta = b
        except InsufficientDataError:
            pass
    diag["tail_beta"] = beta
    flags: list[str] = []

    def envelope(scale):
        return (lb, max(lb, envelope_factor * scale))

    if bounded and ui:
        return RegimePrediction("convergent-second-moment", 2 * e / fm2[-1], lb, flags, diag)
    if bounded:
        return RegimePrediction("bounded-second-moment", envelope(e), lb, flags, diag)
    if beta is not None:
        flags.append("order-only")
        return RegimePrediction("power-law", envelope(e ** (1 / (beta - 1))), lb, flags, diag)
    if max_small:
        flags.append("order-only")
        return RegimePrediction("bounded-max", envelope(e / fm2[-1]), lb, flags, diag)
    if bulk_grows and not ui:
        flags.append("strictly-smaller-order")
        return RegimePrediction("infinite-limit-second-moment", (lb, max(lb, e)), lb, flags, diag)
    flags.append("conflict")
    return RegimePrediction("bounded-second-moment", envelope(e), lb, flags, diag)


# ---------------------------------------------------------------------------
# Power-law exponent
# ---------------------------------------------------------------------------


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise InsufficientDataError("need at least three (x, y) pairs")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class PowerLawFit:
    gamma: float
    slope: float
    expected: float
    eps: tuple
    rho: tuple


def power_law_offspring(gamma: float, eps: float, kmax: float = 1e15) -> OffspringDistribution:
    """Forward-degree law of a power-law degree law shifted to mean ``1 + eps``.

    The degree law has ``P(D >= k) ≍ k**-gamma``; it is mixed with an atom at
    1 or 3 to make it critical, size-biased, and then ``eps`` of mass is moved
    from 0 to 1.
    """
    base = size_biased(critical_mixture(power_law_degree_law(gamma, kmax=kmax)))
    return truncated_family(base, eps, base.max_support)


def power_law_exponent_check(gamma: float, eps_values: Sequence[float], kmax: float = 1e15) -> PowerLawFit:
    """Fit the exponent in ``rho ≍ eps**s`` along a power-law family.

    Expected slope is ``1/(gamma-2)`` for ``2 < gamma < 3`` and 1 for
    ``gamma > 3``.
    """
    eps_values = [float(e) for e in eps_values]
    if len(eps_values) < 3:
        raise InsufficientDataError("need at least three eps values")
    base = size_biased(critical_mixture(power_law_degree_law(gamma, kmax=kmax)))
    rho = [solve_rho(truncated_family(base, e, base.max_support)).rho for e in eps_values]
    slope = loglog_slope(eps_values, rho)
    expected = 1 / (gamma - 2) if 2 < gamma < 3 else 1.0
    return PowerLawFit(gamma, slope, expected, tuple(eps_values), tuple(rho))
