"""Degree sequences, offspring laws and the degree statistics used downstream.

A :class:`DegreeSequence` holds the explicit degrees ``d_1..d_n``; its counts
``n_k`` and all moments are derived from it.  An
:class:`OffspringDistribution` is a finite probability mass function on the
nonnegative integers, stored sparsely so that laws with a few atoms far out
(for instance an atom at ``n``) cost nothing extra.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSequenceError,
    InfeasibleShiftError,
    InfeasibleSurgeryError,
    InvalidParameterError,
)

PMF_TOL = 1e-12
TAIL_TOL = 1e-15


# ---------------------------------------------------------------------------
# Degree sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    """The degrees of ``n`` labelled vertices.

    ``metadata`` records how the sequence was built; in particular
    ``metadata["fixup_vertex"]`` is the (0-based) vertex whose degree was
    raised by one to make the degree sum even, or ``None``.
    """

    degrees: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.degrees)
        if d.ndim != 1:
            raise InvalidParameterError("degrees must be one-dimensional")
        if d.size and not np.issubdtype(d.dtype, np.integer):
            if not np.all(d == np.floor(d)):
                raise InvalidParameterError("degrees must be integers")
        d = d.astype(np.int64, copy=True)
        if d.size and d.min() < 0:
            raise InvalidParameterError("degrees must be nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "degrees", d)

    @classmethod
    def from_counts(cls, counts: Mapping[int, int], metadata=None) -> DegreeSequence:
        """Build the sequence listing degree classes in decreasing ``k``."""
        parts = []
        for k in sorted(counts, reverse=True):
            c = int(counts[k])
            if c < 0 or int(k) < 0:
                raise InvalidParameterError(f"bad count entry {k}: {c}")
            if c:
                parts.append(np.full(c, int(k), dtype=np.int64))
        degrees = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return cls(degrees, dict(metadata or {}))

    @property
    def n(self) -> int:
        return int(self.degrees.size)

    @cached_property
    def counts(self) -> dict[int, int]:
        ks, cs = np.unique(self.degrees, return_counts=True)
        return {int(k): int(c) for k, c in zip(ks, cs)}

    @property
    def ell(self) -> int:
        """Total number of half-edges."""
        return int(self.degrees.sum())

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, DegreeSequence):
            return NotImplemented
        return np.array_equal(self.degrees, other.degrees)

    __hash__ = None


@dataclass(frozen=True)
class DegreeStats:
    """Moments of the degree of a uniformly chosen vertex.

    ``n`` and ``ell`` are ``None`` when the statistics come from a law
    rather than from a concrete sequence.
    """

    mu: float
    nu: float
    eps: float
    m2: float
    R: float
    kappa_n: float
    delta: int
    ell: int | None
    n: int | None


def _moment_sums(counts: Mapping[int, int]):
    # exact integer sums, largest degrees first
    s1 = s2 = s3 = f2 = f3 = 0
    for k in sorted(counts, reverse=True):
        c = counts[k]
        s1 += k * c
        s2 += k * k * c
        s3 += k**3 * c
        f2 += k * (k - 1) * c
        f3 += k * (k - 1) * (k - 2) * c
    return s1, s2, s3, f2, f3


def stats(seq) -> DegreeStats:
    """Degree statistics of a sequence (or of a degree law).

    Sums over a sequence's counts are done in exact integer arithmetic and
    divided once, so every field is correctly rounded.
    """
    if not isinstance(seq, DegreeSequence):
        return _stats_from_law(as_distribution(seq))
    if seq.n < 1:
        raise InvalidParameterError("need at least one vertex")
    counts = seq.counts
    s1, s2, s3, f2, f3 = _moment_sums(counts)
    if s1 == 0:
        raise DegenerateSequenceError("all vertices are isolated; nu is undefined")
    n = seq.n
    nu = f2 / s1
    return DegreeStats(
        mu=s1 / n,
        nu=nu,
        eps=(f2 - s1) / s1,
        m2=s2 / n,
        R=s3 / n,
        kappa_n=f3 / s1,
        delta=max(counts),
        ell=s1,
        n=n,
    )


def _stats_from_law(law: OffspringDistribution) -> DegreeStats:
    k = law.support.astype(float)
    p = law.probs
    mu = math.fsum(k * p)
    if mu <= 0:
        raise DegenerateSequenceError("degree law has zero mean")
    f2 = math.fsum(k * (k - 1) * p)
    f3 = math.fsum(k * (k - 1) * (k - 2) * p)
    nu = f2 / mu
    return DegreeStats(
        mu=mu,
        nu=nu,
        eps=math.fsum(k * (k - 2) * p) / mu,
        m2=math.fsum(k * k * p),
        R=math.fsum(k**3 * p),
        kappa_n=f3 / mu,
        delta=law.max_support,
        ell=None,
        n=None,
    )


def _even_fixup(degrees: np.ndarray, rng=None):
    """Raise one degree-minimal vertex by one if the degree sum is odd."""
    if degrees.sum() % 2 == 0:
        return degrees, None
    candidates = np.flatnonzero(degrees == degrees.min())
    if rng is None:
        v = int(candidates[-1])
    else:
        v = int(candidates[rng.integers(candidates.size)])
    degrees = degrees.copy()
    degrees[v] += 1
    return degrees, v


def from_iid_pmf(pmf, n: int, rng) -> DegreeSequence:
    """I.i.d. degrees drawn from ``pmf``, then made to have an even sum."""
    law = as_distribution(pmf)
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    degrees = rng.choice(law.support, size=n, p=law.probs)
    degrees, v = _even_fixup(degrees, rng)
    return DegreeSequence(degrees, {"source": "iid", "fixup_vertex": v})


def sequence_from_pmf(pmf, n: int) -> DegreeSequence:
    """Deterministic sequence whose counts are ``n p_k`` rounded by largest remainder."""
    law = as_distribution(pmf)
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    raw = law.probs * n
    base = np.floor(raw).astype(np.int64)
    short = n - int(base.sum())
    if short > 0:
        base[np.argsort(-(raw - base), kind="stable")[:short]] += 1
    seq = DegreeSequence.from_counts(dict(zip(law.support.tolist(), base.tolist())))
    d, v = _even_fixup(seq.degrees)
    return DegreeSequence(d, {"source": "pmf", "fixup_vertex": v})


def inverse_size_biased(dist) -> OffspringDistribution:
    """Degree law ``D`` whose forward-degree law ``D* - 1`` is ``dist``."""
    law = as_distribution(dist)
    k = law.support + 1
    w = law.probs / k
    return OffspringDistribution(k, w / math.fsum(w))


def power_law_sequence(gamma: float, n: int) -> DegreeSequence:
    """Deterministic quantile sequence ``d_i = max(1, floor((n/i)**(1/gamma)))``.

    Degrees are listed in decreasing order; the even-sum fixup (if needed)
    raises the last vertex, which has minimal degree.
    """
    if not gamma > 1:
        raise InvalidParameterError("gamma must exceed 1")
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    i = np.arange(1, n + 1, dtype=float)
    d = np.floor((n / i) ** (1.0 / gamma)).astype(np.int64)
    # guard against the float power landing just below an integer
    up = (d + 1).astype(float) ** gamma * i <= n
    d[up] += 1
    d = np.maximum(d, 1)
    d, v = _even_fixup(d)
    return DegreeSequence(d, {"source": "power_law", "gamma": gamma, "fixup_vertex": v})


def two_atom_sequence(n: int, *, eps: float | None = None, p3: float | None = None) -> DegreeSequence:
    """Degrees 1 and 3 with a fraction ``p3`` of degree-3 vertices.

    Passing ``eps`` instead picks ``p3 = (1+eps)/(4-2 eps)``, the value for
    which the limiting ``nu`` equals ``1+eps``.
    """
    if (eps is None) == (p3 is None):
        raise InvalidParameterError("give exactly one of eps, p3")
    if p3 is None:
        p3 = (1 + eps) / (4 - 2 * eps)
    if not 0 <= p3 <= 1:
        raise InvalidParameterError(f"p3={p3} outside [0, 1]")
    n3 = int(round(p3 * n))
    d = np.ones(n, dtype=np.int64)
    d[:n3] = 3
    d, v = _even_fixup(d)
    return DegreeSequence(d, {"source": "two_atom", "p3": p3, "fixup_vertex": v})


def degree_surgery(seq: DegreeSequence, m: int) -> DegreeSequence:
    """Turn ``2m`` degree-1 vertices into ``m`` of degree 0 and ``m`` of degree 2.

    The lowest-indexed degree-1 vertices are used.  The half-edge total is
    unchanged while ``n E D(D-1)`` grows by exactly ``2m``.
    """
    if m < 0:
        raise InvalidParameterError("m must be nonnegative")
    ones = np.flatnonzero(seq.degrees == 1)
    if ones.size < 2 * m:
        raise InfeasibleSurgeryError(f"need {2 * m} degree-1 vertices, have {ones.size}")
    if m == 0:
        return seq
    d = seq.degrees.copy()
    d[ones[:m]] = 0
    d[ones[m : 2 * m]] = 2
    meta = dict(seq.metadata, surgery_m=m)
    return DegreeSequence(d, meta)


# ---------------------------------------------------------------------------
# Offspring distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OffspringDistribution:
    """Finite pmf on the nonnegative integers, stored as sorted atoms."""

    support: np.ndarray
    probs: np.ndarray
    truncated_at: int | None = None

    def __post_init__(self):
        k = np.asarray(self.support, dtype=np.int64)
        p = np.asarray(self.probs, dtype=float)
        if k.shape != p.shape or k.ndim != 1 or k.size == 0:
            raise InvalidParameterError("support and probs must be equal-length 1-d arrays")
        if k.min() < 0:
            raise InvalidParameterError("support must be nonnegative")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidParameterError("probabilities must be nonnegative")
        total = math.fsum(p)
        if abs(total - 1.0) > PMF_TOL:
            raise InvalidParameterError(f"probabilities sum to {total!r}, not 1")
        order = np.argsort(k, kind="stable")
        k, p = k[order], p[order]
        if np.any(np.diff(k) == 0):
            raise InvalidParameterError("repeated support points")
        keep = p > 0
        k, p = k[keep], p[keep]
        k.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "support", k)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, float], normalize=False) -> OffspringDistribution:
        ks = np.array([int(k) for k in pmf], dtype=np.int64)
        ps = np.array([float(pmf[k]) for k in pmf], dtype=float)
        if normalize:
            ps = ps / math.fsum(ps)
        return cls(ks, ps)

    @classmethod
    def from_function(cls, mass, tail_tol=TAIL_TOL, max_terms=10**7) -> OffspringDistribution:
        """Tabulate an infinite-support pmf ``mass(k)`` until the tail is below ``tail_tol``.

        The cut point is stored in ``truncated_at`` and the kept masses are
        renormalised.
        """
        ps = []
        acc = 0.0
        for k in range(max_terms):
            pk = float(mass(k))
            ps.append(pk)
            acc += pk
            if 1.0 - acc < tail_tol and pk < tail_tol:
                break
        else:
            raise InvalidParameterError("tail did not fall below tolerance")
        p = np.array(ps)
        return cls(np.arange(p.size), p / math.fsum(p), truncated_at=p.size - 1)

    @property
    def pmf(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.support, self.probs)}

    def prob(self, k: int) -> float:
        i = np.searchsorted(self.support, k)
        if i < self.support.size and self.support[i] == k:
            return float(self.probs[i])
        return 0.0

    def expect(self, f) -> float:
        """``E f(X)`` with compensated summation, ``f`` vectorised over floats."""
        return math.fsum(np.asarray(f(self.support.astype(float))) * self.probs)

    @cached_property
    def mean(self) -> float:
        return self.expect(lambda k: k)

    @cached_property
    def second_moment(self) -> float:
        return self.expect(lambda k: k * k)

    @cached_property
    def factorial_moment2(self) -> float:
        """``E X(X-1)``."""
        return self.expect(lambda k: k * (k - 1))

    @property
    def eps(self) -> float:
        # E(X-1) summed directly: avoids cancellation in mean - 1
        return self.expect(lambda k: k - 1)

    @property
    def max_support(self) -> int:
        return int(self.support[-1])

    def __repr__(self):
        if self.support.size <= 6:
            body = ", ".join(f"{k}: {p:.6g}" for k, p in self.pmf.items())
        else:
            body = f"{self.support.size} atoms, max {self.max_support}"
        return f"OffspringDistribution({{{body}}}, mean={self.mean:.6g})"


def as_distribution(obj) -> OffspringDistribution:
    if isinstance(obj, OffspringDistribution):
        return obj
    if isinstance(obj, DegreeSequence):
        counts = obj.counts
        return OffspringDistribution.from_pmf({k: c / obj.n for k, c in counts.items()}, normalize=True)
    if isinstance(obj, Mapping):
        return OffspringDistribution.from_pmf(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a distribution")


def size_biased(dist) -> OffspringDistribution:
    """Law of ``D* - 1`` where ``D*`` is the size-biased version of ``D``.

    ``P(D~ = k-1) = k P(D=k) / E D``.  Accepts a degree sequence, a pmf
    mapping or an :class:`OffspringDistribution`.
    """
    if isinstance(dist, DegreeSequence):
        counts = dist.counts
        s1 = sum(k * c for k, c in counts.items())
        if s1 == 0:
            raise DegenerateSequenceError("sequence has no half-edges")
        pmf = {k - 1: k * c / s1 for k, c in counts.items() if k > 0}
        return OffspringDistribution.from_pmf(pmf, normalize=True)
    law = as_distribution(dist)
    k = law.support.astype(float)
    w = k * law.probs
    mu = math.fsum(w)
    if mu <= 0:
        raise DegenerateSequenceError("distribution has zero mean")
    keep = law.support > 0
    return OffspringDistribution(law.support[keep] - 1, w[keep] / math.fsum(w[keep]))


def poisson_law(lam: float, tail_tol=TAIL_TOL) -> OffspringDistribution:
    """Poisson(lam) truncated where the remaining tail is below ``tail_tol``."""
    if lam <= 0:
        raise InvalidParameterError("lam must be positive")
    logp0 = -lam
    return OffspringDistribution.from_function(
        lambda k: math.exp(logp0 + k * math.log(lam) - math.lgamma(k + 1)), tail_tol
    )


def e3_offspring(n: int, eps: float, p: float) -> OffspringDistribution:
    """Three-atom law on ``{0, 2, n}`` with mean ``1 + eps``.

    ``P(n) = p``, ``P(0) = (1 - eps + (n-2) p)/2``, ``P(2) = (1 + eps - n p)/2``.
    """
    if n < 3:
        raise InvalidParameterError("n must be at least 3")
    if not 0 < eps <= 1:
        raise InvalidParameterError("eps must lie in (0, 1]")
    if not 0 < p <= 1 / n:
        raise InvalidParameterError("p must lie in (0, 1/n]")
    p0 = (1 - eps + (n - 2) * p) / 2
    p2 = (1 + eps - n * p) / 2
    for name, v in (("P(0)", p0), ("P(2)", p2)):
        if not 0 <= v <= 1:
            raise InvalidParameterError(f"{name}={v} outside [0, 1]")
    return OffspringDistribution(np.array([0, 2, n]), np.array([p0, p2, p]))


def truncated_family(base, eps: float, M: int) -> OffspringDistribution:
    """Law of ``X ∧ M`` with mass ``delta`` moved from 0 to 1.

    ``delta = eps + E(X - X∧M)`` restores the mean to ``1 + eps`` for a
    mean-one base.  It is computed as ``1 + eps - E(X∧M)`` so that rounding
    in the base mean is absorbed.
    """
    base = as_distribution(base)
    if M < 1:
        raise InvalidParameterError("M must be at least 1")
    if abs(base.mean - 1) > 1e-9:
        raise InvalidParameterError(f"base law has mean {base.mean}, expected 1")
    k = np.minimum(base.support, M)
    trunc_mean = math.fsum(k.astype(float) * base.probs)
    delta = 1 + eps - trunc_mean
    pmf: dict[int, float] = {}
    for kk, pp in zip(k, base.probs):
        pmf[int(kk)] = pmf.get(int(kk), 0.0) + float(pp)
    p0 = pmf.get(0, 0.0)
    if p0 < delta:
        raise InfeasibleShiftError(f"P(X=0)={p0} is smaller than the shift {delta}")
    pmf[0] = p0 - delta
    pmf[1] = pmf.get(1, 0.0) + delta
    return OffspringDistribution.from_pmf(pmf)


def power_law_degree_law(gamma: float, kmax: float = 1e15, dense_until: int = 64, ratio: float = 1.25) -> OffspringDistribution:
    """Degree law with ``P(D >= s) = s**-gamma`` on a sparse support.

    Support is every integer up to ``dense_until`` and then a geometric grid
    of ratio ``ratio`` up to ``kmax``; in between the tail is flat, so
    ``P(D > k)`` stays within a factor ``ratio**gamma`` of ``k**-gamma``.
    """
    if not gamma > 1:
        raise InvalidParameterError("gamma must exceed 1")
    pts = list(range(1, dense_until + 1))
    s = float(dense_until)
    while True:
        s = math.floor(s * ratio)
        if s > kmax:
            break
        pts.append(int(s))
    pts = np.array(pts, dtype=np.int64)
    tail = pts.astype(float) ** -gamma
    p = np.empty_like(tail)
    p[:-1] = tail[:-1] - tail[1:]
    p[-1] = tail[-1]
    return OffspringDistribution(pts, p / math.fsum(p))


def critical_mixture(law) -> OffspringDistribution:
    """Mix ``law`` with an atom at 1 or 3 so that ``E D(D-2) = 0`` (``nu = 1``)."""
    law = as_distribution(law)
    k = law.support.astype(float)
    b = math.fsum(k * (k - 2) * law.probs)  # E D(D-2)
    if b > 0:
        atom, c = 1, -1.0  # 1*(1-2)
    elif b < 0:
        atom, c = 3, 3.0
    else:
        return law
    w = b / (b - c)
    pmf = {kk: (1 - w) * pp for kk, pp in law.pmf.items()}
    pmf[atom] = pmf.get(atom, 0.0) + w
    return OffspringDistribution.from_pmf(pmf, normalize=True)


# ---------------------------------------------------------------------------
# CSV input/output
# ---------------------------------------------------------------------------


def write_degrees(seq: DegreeSequence, path, form="counts"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if form == "counts":
            w.writerow(["k", "n_k"])
            for k in sorted(seq.counts):
                w.writerow([k, seq.counts[k]])
        elif form == "explicit":
            w.writerow(["vertex", "degree"])
            for i, d in enumerate(seq.degrees, start=1):
                w.writerow([i, int(d)])
        else:
            raise InvalidParameterError(f"unknown form {form!r}")


def load_degrees(path) -> DegreeSequence:
    """Read either the ``k,n_k`` counts form or the ``vertex,degree`` form."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InvalidParameterError(f"{path}: empty degree file")
    header = [h.strip() for h in rows[0]]
    body = [[int(x) for x in r] for r in rows[1:]]
    if header == ["k", "n_k"]:
        counts: dict[int, int] = {}
        for k, c in body:
            counts[k] = counts.get(k, 0) + c
        return DegreeSequence.from_counts(counts, {"source": str(Path(path).name)})
    if header == ["vertex", "degree"]:
        body.sort()
        ids = [v for v, _ in body]
        if ids and ids != list(range(ids[0], ids[0] + len(ids))):
            raise InvalidParameterError(f"{path}: vertex ids must be consecutive")
        return DegreeSequence(np.array([d for _, d in body], dtype=np.int64), {"source": str(Path(path).name)})
    raise InvalidParameterError(f"{path}: unrecognised header {header}")


def write_pmf(dist: OffspringDistribution, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "p"])
        for k, p in dist.pmf.items():
            w.writerow([k, repr(p)])


def load_pmf(path) -> OffspringDistribution:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [h.strip() for h in rows[0]] != ["k", "p"]:
        raise InvalidParameterError(f"{path}: expected header k,p")
    pmf: dict[int, float] = {}
    for k, p in rows[1:]:
        pmf[int(k)] = pmf.get(int(k), 0.0) + float(p)
    return OffspringDistribution.from_pmf(pmf)
