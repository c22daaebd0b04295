"""Continuous-time construction-and-exploration of the configuration model.

Every half-edge gets an Exp(1) lifetime.  Exploration alternates three steps:

* **C1** when no half-edge is active: wake a sleeping vertex chosen through a
  uniformly random sleeping half-edge; all its half-edges become active.
* **C2** kill an active half-edge (the most recently activated one).
* **C3** wait for the next living half-edge to die spontaneously and pair it
  with the killed one.  A sleeping owner is woken; if the dying half-edge was
  active, a cycle has been closed.

Lifetimes are sorted once and swept; half-edges killed in C2 are marked dead
and skipped by the sweep.  The C1 choice walks an independent uniform
permutation of the half-edges, skipping those that are no longer sleeping,
which selects uniformly among the sleeping half-edges at that moment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .config_model import MultiGraph, graph_from_pairs
from .degree_model import DegreeSequence, OffspringDistribution, as_distribution
from .errors import CorruptTraceError, InvalidParameterError, NumericalInstabilityError, ParityError

C1, ACTIVATION, CYCLE = 0, 1, 2
EVENT_NAMES = {C1: "C1", ACTIVATION: "activation", CYCLE: "cycle"}
FULL_TRACE_MAX_N = 100_000
DECIMATED_POINTS = 10_000


@dataclass(eq=False)
class ExplorationTrace:
    """Event-ordered record of one exploration.

    Samples ``t, S, A, V, L, N`` are taken after all instantaneous actions at
    an event (in particular after the C2 kill that follows it).  ``kind`` is
    ``C1`` for a wake-up, ``ACTIVATION`` for a pairing whose partner woke a
    sleeping vertex and ``CYCLE`` for a pairing with an active half-edge;
    ``ids`` holds (woken vertex, chosen half-edge) for C1 and (killed,
    partner) half-edges for pairings.

    ``boundary_*`` arrays hold the state just before each C1, followed by a
    final entry for the end of the exploration.  ``S_tilde``/``A_tilde`` are
    the wake-up-free processes on the same lifetimes at the sample times.
    """

    n: int
    ell: int
    max_degree: int
    t: np.ndarray
    S: np.ndarray
    A: np.ndarray
    V: np.ndarray
    L: np.ndarray
    N: np.ndarray
    kind: np.ndarray
    ids: np.ndarray
    boundary_t: np.ndarray
    boundary_S: np.ndarray
    boundary_A: np.ndarray
    boundary_V: np.ndarray
    boundary_N: np.ndarray
    S_tilde: np.ndarray
    V_tilde: np.ndarray
    complete: bool
    decimated: bool

    @property
    def A_tilde(self) -> np.ndarray:
        return self.L - self.S_tilde

    @property
    def final_N(self) -> int:
        return int(self.boundary_N[-1])


@dataclass(frozen=True)
class ProcessState:
    """The processes at one fixed time ``t`` (wake-up-free ones included)."""

    t: float
    S: int
    A: int
    V: int
    L: int
    N: int
    S_tilde: int
    V_tilde: int


class TildeProcess:
    """``S~(t)`` and ``V~(t)``: vertices all of whose half-edges outlive ``t``."""

    def __init__(self, degrees: np.ndarray, lifetimes: np.ndarray):
        deg = np.asarray(degrees)
        pos = deg > 0
        starts = np.concatenate(([0], np.cumsum(deg)[:-1]))[pos]
        first_death = np.minimum.reduceat(lifetimes, starts) if starts.size else np.zeros(0)
        order = np.argsort(first_death)
        self._death = first_death[order]
        d = deg[pos][order]
        # suffix sums: mass of vertices whose first death comes at or after index i
        self._s_suffix = np.concatenate((np.cumsum(d[::-1])[::-1], [0]))
        self._n0 = int((~pos).sum())

    def _index(self, t):
        return np.searchsorted(self._death, t, side="right")

    def S(self, t):
        return self._s_suffix[self._index(t)]

    def V(self, t):
        return self._death.size - self._index(t) + self._n0


def _run(seq: DegreeSequence, rng, stop_time=None, record=True):
    ell = seq.ell
    if ell % 2:
        raise ParityError(f"odd number of half-edges ({ell})")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    deg_np = seq.degrees
    n = seq.n
    life_np = rng.exponential(size=ell)
    order = np.argsort(life_np, kind="stable").tolist()
    c1_order = rng.permutation(ell).tolist()
    life = life_np.tolist()
    deg = deg_np.tolist()
    start = np.concatenate(([0], np.cumsum(deg_np)[:-1])).tolist() if n else []
    owner = np.repeat(np.arange(n), deg_np).tolist()

    decimate = n > FULL_TRACE_MAX_N
    every = max(1, math.ceil(ell / DECIMATED_POINTS)) if decimate else 1

    state = bytearray(ell)  # 0 sleeping, 1 active, 2 dead
    stack: list[int] = []
    S, A, V, L, N = ell, 0, n, ell, 0
    t = 0.0
    p = c = 0
    pairs: list[int] = []
    rec = ([], [], [], [], [], [], [], [], [])  # t S A V L N kind id0 id1
    bt, bS, bA, bV, bN = [], [], [], [], []
    pending = -1
    count = 0
    stopped = False

    def push(tt, kind, a, b):
        for lst, val in zip(rec, (tt, S, A, V, L, N, kind, a, b)):
            lst.append(val)

    while True:
        if pending < 0:
            while c < ell and state[c1_order[c]] != 0:
                c += 1
            if c == ell:
                break
            h = c1_order[c]
            v = owner[h]
            bt.append(t); bS.append(S); bA.append(A); bV.append(V); bN.append(N)
            s0 = start[v]
            for j in range(s0, s0 + deg[v]):
                state[j] = 1
                stack.append(j)
            S -= deg[v]
            V -= 1
            A += deg[v]
            # C2
            pending = stack.pop()
            state[pending] = 2
            A -= 1
            L -= 1
            if record:
                push(t, C1, v, h)
        # C3: the next spontaneous death among living half-edges
        while state[order[p]] == 2:
            p += 1
        h2 = order[p]
        t2 = life[h2]
        if stop_time is not None and t2 > stop_time:
            stopped = True
            break
        p += 1
        t = t2
        if state[h2] == 1:
            N += 1
            A -= 1
            kind = CYCLE
        else:
            u = owner[h2]
            s0 = start[u]
            for j in range(s0, s0 + deg[u]):
                if j != h2:
                    state[j] = 1
                    stack.append(j)
            S -= deg[u]
            V -= 1
            A += deg[u] - 1
            kind = ACTIVATION
        state[h2] = 2
        L -= 1
        pairs.append(pending)
        pairs.append(h2)
        killed = pending
        pending = -1
        if A > 0:
            pending = stack.pop()
            while state[pending] != 1:
                pending = stack.pop()
            state[pending] = 2
            A -= 1
            L -= 1
        count += 1
        if record and (not decimate or kind == CYCLE or count % every == 0):
            push(t, kind, killed, h2)

    if not stopped:
        bt.append(t); bS.append(S); bA.append(A); bV.append(V); bN.append(N)
    final = ProcessState(t if not stopped else stop_time, S, A, V, L, N, 0, 0)
    return dict(
        life=life_np, pairs=pairs, rec=rec, bounds=(bt, bS, bA, bV, bN),
        final=final, stopped=stopped, decimated=decimate,
    )


def explore(seq: DegreeSequence, rng=None) -> tuple[ExplorationTrace, MultiGraph]:
    """Run the exploration to completion; return its trace and the induced pairing."""
    out = _run(seq, rng)
    rec = out["rec"]
    tilde = TildeProcess(seq.degrees, out["life"])
    t = np.array(rec[0], dtype=float)
    bt, bS, bA, bV, bN = (np.array(x) for x in out["bounds"])
    trace = ExplorationTrace(
        n=seq.n, ell=seq.ell, max_degree=seq.max_degree,
        t=t,
        S=np.array(rec[1], dtype=np.int64),
        A=np.array(rec[2], dtype=np.int64),
        V=np.array(rec[3], dtype=np.int64),
        L=np.array(rec[4], dtype=np.int64),
        N=np.array(rec[5], dtype=np.int64),
        kind=np.array(rec[6], dtype=np.int8),
        ids=np.column_stack((rec[7], rec[8])).astype(np.int64) if rec[7] else np.zeros((0, 2), np.int64),
        boundary_t=bt.astype(float),
        boundary_S=bS.astype(np.int64),
        boundary_A=bA.astype(np.int64),
        boundary_V=bV.astype(np.int64),
        boundary_N=bN.astype(np.int64),
        S_tilde=np.asarray(tilde.S(t), dtype=np.int64),
        V_tilde=np.asarray(tilde.V(t), dtype=np.int64),
        complete=True,
        decimated=out["decimated"],
    )
    seed = rng if isinstance(rng, (int, np.integer)) else None
    graph = graph_from_pairs(seq, np.array(out["pairs"], dtype=np.int64), seed)
    return trace, graph


def processes_at(seq: DegreeSequence, t: float, rng=None) -> ProcessState:
    """Run the exploration only up to time ``t`` and report every process there."""
    if t < 0:
        raise InvalidParameterError("t must be nonnegative")
    out = _run(seq, rng, stop_time=t, record=False)
    f = out["final"]
    tilde = TildeProcess(seq.degrees, out["life"])
    return ProcessState(t, f.S, f.A, f.V, f.L, f.N, int(tilde.S(t)), int(tilde.V(t)))


def component_sizes_from_trace(trace: ExplorationTrace) -> list[tuple[int, int, int]]:
    """Sorted ``(v, e, k)`` of every component, read off the C1 boundaries.

    Vertices never woken are isolated and contribute ``(1, 0, 0)`` each.
    """
    if not trace.complete:
        raise CorruptTraceError("trace is incomplete")
    T, S, V, N, A = (trace.boundary_t, trace.boundary_S, trace.boundary_V,
                     trace.boundary_N, trace.boundary_A)
    if T.size == 0 or np.any(np.diff(T) < 0):
        raise CorruptTraceError("component boundaries are not monotone")
    dv, ds, dn = -np.diff(V), -np.diff(S), np.diff(N)
    if np.any(dv <= 0) or np.any(ds < 0) or np.any(ds % 2) or np.any(dn < 0) or np.any(A != 0):
        raise CorruptTraceError("inconsistent boundary states")
    out = [(int(a), int(b) // 2, int(c)) for a, b, c in zip(dv, ds, dn)]
    out.extend([(1, 0, 0)] * int(V[-1]))
    out.sort()
    for v, e, k in out:
        if k != e - v + 1:
            raise CorruptTraceError("cycle count disagrees with e - v + 1")
    return out


def sandwich_holds(trace: ExplorationTrace) -> np.ndarray:
    """Per-sample truth of ``0 <= S~ - S = A - A~ < -min_{s<=t} A~(s) + Delta``."""
    gap = trace.S_tilde - trace.S
    a_tilde = trace.A_tilde
    floor = -np.minimum.accumulate(np.minimum(a_tilde, 0)) + trace.max_degree
    return (gap >= 0) & (gap == trace.A - a_tilde) & (gap < floor)


# ---------------------------------------------------------------------------
# Analytic means and the psi function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TildeMeans:
    t: float
    ES_tilde: float
    EV_tilde: float
    EL: float
    EA_tilde: float


def tilde_means(seq: DegreeSequence, t: float) -> TildeMeans:
    """Expected wake-up-free processes: ``V~_k(t)`` is Bin(n_k, e^{-kt})."""
    if t < 0:
        raise InvalidParameterError("t must be nonnegative")
    counts = seq.counts
    es = math.fsum(k * c * math.exp(-k * t) for k, c in counts.items())
    ev = math.fsum(c * math.exp(-k * t) for k, c in counts.items())
    el = seq.ell * math.exp(-2 * t)
    return TildeMeans(t, es, ev, el, el - es)


def _degree_law(seq) -> OffspringDistribution:
    return as_distribution(seq)


def gamma_n(seq, alpha: float) -> float:
    """``E[D (1 ∧ alpha D)^2]``."""
    if alpha < 0:
        raise InvalidParameterError("alpha must be nonnegative")
    return _degree_law(seq).expect(lambda k: k * np.minimum(1.0, alpha * k) ** 2)


def psi(seq, alpha: float, gamma: float, t):
    """``(mu e^{-2 alpha t} - E[D e^{-alpha t D}]) / gamma``.

    Written as ``-E[D e^{-2 alpha t} expm1(-alpha t (D-2))] / gamma`` so the
    near-cancellation of the two terms costs no precision.
    """
    if gamma == 0:
        raise NumericalInstabilityError("gamma is zero")
    law = _degree_law(seq)
    k = law.support.astype(float)
    p = law.probs
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0) or np.any(ts > 2):
        raise InvalidParameterError("t must lie in [0, 2]")
    vals = np.array([
        -math.fsum(p * k * np.exp(-2 * alpha * tt) * np.expm1(-alpha * tt * (k - 2))) / gamma
        for tt in ts
    ])
    return vals.item() if np.ndim(t) == 0 else vals


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_trace(trace: ExplorationTrace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "S", "A", "V", "L", "N", "event_kind"])
        for row in zip(trace.t.tolist(), trace.S.tolist(), trace.A.tolist(), trace.V.tolist(),
                       trace.L.tolist(), trace.N.tolist(), trace.kind.tolist()):
            w.writerow([repr(row[0]), *row[1:6], EVENT_NAMES[row[6]]])


def write_boundaries(trace: ExplorationTrace, path):
    """One row per explored component: start time and ``(v, e, k)``."""
    T, S, V, N = trace.boundary_t, trace.boundary_S, trace.boundary_V, trace.boundary_N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T_i", "v", "e", "k"])
        for i in range(T.size - 1):
            w.writerow([repr(float(T[i])), int(V[i] - V[i + 1]), int(S[i] - S[i + 1]) // 2, int(N[i + 1] - N[i])])
