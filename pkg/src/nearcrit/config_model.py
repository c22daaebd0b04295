"""Configuration multigraphs: uniform half-edge pairing and component statistics."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .degree_model import DegreeSequence, DegreeStats
from .errors import InvalidParameterError, ParityError, RejectionFailure

DEFAULT_MAX_ATTEMPTS = 200


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """A perfect matching of half-edges, viewed as a multigraph.

    Half-edges of vertex ``v`` are the indices ``start[v] .. start[v]+d_v-1``
    of ``half_edge_owner``.  ``half_edge_pairs`` lists the matched half-edge
    indices and ``edges`` the corresponding vertex pairs (0-based; loops
    appear as ``(v, v)``).
    """

    n: int
    edges: np.ndarray
    half_edge_owner: np.ndarray
    half_edge_pairs: np.ndarray
    seed: int | None = None

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        """Per-vertex incidence count, loops counted twice."""
        return np.bincount(self.edges.ravel(), minlength=self.n)


def half_edge_owner(seq: DegreeSequence) -> np.ndarray:
    return np.repeat(np.arange(seq.n, dtype=np.int64), seq.degrees)


def _check_parity(seq: DegreeSequence):
    if seq.ell % 2:
        raise ParityError(f"odd number of half-edges ({seq.ell})")


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), rng


def graph_from_pairs(seq: DegreeSequence, pairs: np.ndarray, seed=None) -> MultiGraph:
    owner = half_edge_owner(seq)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return MultiGraph(seq.n, owner[pairs], owner, pairs, seed)


def pair_half_edges(seq: DegreeSequence, rng=None) -> MultiGraph:
    """Uniform random perfect matching of the half-edges.

    A uniform permutation read off two entries at a time is the vectorised
    form of the sequential shuffle-and-pair: every matching is equally
    likely.
    """
    _check_parity(seq)
    rng, seed = _as_rng(rng)
    perm = rng.permutation(seq.ell)
    return graph_from_pairs(seq, perm.reshape(-1, 2), seed)


def is_simple(g: MultiGraph) -> bool:
    """True iff the graph has no loops and no repeated vertex pair."""
    if g.num_edges == 0:
        return True
    u, v = g.edges[:, 0], g.edges[:, 1]
    if np.any(u == v):
        return False
    key = np.minimum(u, v) * g.n + np.maximum(u, v)
    key.sort()
    return not np.any(key[1:] == key[:-1])


def sample_simple(seq: DegreeSequence, rng=None, max_attempts: int = DEFAULT_MAX_ATTEMPTS):
    """Pair repeatedly until the result is simple; returns ``(graph, attempts)``."""
    if max_attempts < 1:
        raise InvalidParameterError("max_attempts must be at least 1")
    rng, _ = _as_rng(rng)
    for attempt in range(1, max_attempts + 1):
        g = pair_half_edges(seq, rng)
        if is_simple(g):
            return g, attempt
    raise RejectionFailure(max_attempts)


def simple_prob_prediction(stats) -> float:
    """Limiting probability ``exp(-nu/2 - nu^2/4)`` that the multigraph is simple."""
    nu = stats.nu if isinstance(stats, DegreeStats) else float(stats)
    return math.exp(-nu / 2 - nu * nu / 4)


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ComponentStats:
    """Vertex and edge counts of every component, largest first.

    Ties in vertex count are broken by the smallest vertex index contained in
    the component.  ``c1_degree_counts`` maps ``k`` to the number of
    degree-``k`` vertices in the largest component.
    """

    v: np.ndarray
    e: np.ndarray
    labels: np.ndarray
    c1_label: int
    c1_degree_counts: dict

    @property
    def k(self) -> np.ndarray:
        return self.e - self.v + 1

    @property
    def component_count(self) -> int:
        return int(self.v.size)

    @property
    def v1(self) -> int:
        return int(self.v[0]) if self.v.size else 0

    @property
    def e1(self) -> int:
        return int(self.e[0]) if self.e.size else 0

    @property
    def k1(self) -> int:
        return self.e1 - self.v1 + 1 if self.v.size else 0

    @property
    def v2(self) -> int:
        return int(self.v[1]) if self.v.size > 1 else 0

    @property
    def e2(self) -> int:
        return int(self.e[1]) if self.e.size > 1 else 0

    def triples(self) -> list[tuple[int, int, int]]:
        """Sorted multiset of ``(v, e, k)`` over all components."""
        return sorted(zip(self.v.tolist(), self.e.tolist(), self.k.tolist()))


def components(g: MultiGraph) -> ComponentStats:
    """Exact component statistics.

    Loops add an edge to their component but merge nothing, so a loop counts
    as one independent cycle.
    """
    n = g.n
    if g.num_edges:
        adj = coo_matrix((np.ones(g.num_edges, dtype=np.int8), (g.edges[:, 0], g.edges[:, 1])), shape=(n, n))
        count, labels = connected_components(adj, directed=False)
    else:
        count, labels = n, np.arange(n)
    v = np.bincount(labels, minlength=count)
    e = np.bincount(labels[g.edges[:, 0]], minlength=count) if g.num_edges else np.zeros(count, dtype=np.int64)
    first = np.full(count, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n))
    order = np.lexsort((first, -v))
    c1 = int(order[0]) if count else -1
    c1_counts = {}
    if count:
        deg = g.degrees()[labels == c1]
        ks, cs = np.unique(deg, return_counts=True)
        c1_counts = {int(a): int(b) for a, b in zip(ks, cs)}
    return ComponentStats(v[order].astype(np.int64), e[order].astype(np.int64), labels, c1, c1_counts)


class UnionFind:
    """Plain union-find with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def union_find_triples(n: int, edges) -> list[tuple[int, int, int]]:
    """``(v, e, k)`` of every component via a pure-Python union-find."""
    uf = UnionFind(n)
    edges = [(int(a), int(b)) for a, b in edges]
    for a, b in edges:
        uf.union(a, b)
    v: dict[int, int] = {}
    e: dict[int, int] = {}
    for x in range(n):
        r = uf.find(x)
        v[r] = v.get(r, 0) + 1
    for a, _ in edges:
        r = uf.find(a)
        e[r] = e.get(r, 0) + 1
    return sorted((v[r], e.get(r, 0), e.get(r, 0) - v[r] + 1) for r in v)


# ---------------------------------------------------------------------------
# Edge-list CSV
# ---------------------------------------------------------------------------


def degree_hash(seq: DegreeSequence) -> str:
    return hashlib.sha256(np.ascontiguousarray(seq.degrees, dtype="<i8").tobytes()).hexdigest()


def write_edges(g: MultiGraph, path, degree_file_hash: str | None = None, extra: dict | None = None):
    """Write ``u,v`` rows (1-based) under ``#`` provenance comments.

    ``path`` may also be an open text handle.
    """
    if hasattr(path, "write"):
        _write_edges(g, path, degree_file_hash, extra)
        return
    with open(path, "w") as fh:
        _write_edges(g, fh, degree_file_hash, extra)


def _write_edges(g, fh, degree_file_hash, extra):
    fh.write(f"# seed={g.seed}\n")
    fh.write(f"# degrees_sha256={degree_file_hash}\n")
    for key, val in (extra or {}).items():
        fh.write(f"# {key}={val}\n")
    fh.write("u,v\n")
    np.savetxt(fh, g.edges + 1, fmt="%d", delimiter=",")


def read_edges(path) -> tuple[np.ndarray, dict]:
    """Return the 0-based edge array and the ``key=value`` comment fields."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            elif line == "u,v":
                continue
            else:
                a, b = line.split(",")
                rows.append((int(a) - 1, int(b) - 1))
    return np.array(rows, dtype=np.int64).reshape(-1, 2), meta
