"""Walk state spaces and exact small-instance oracles.

Two finite topologies are supported: the balanced b-ary tree of height k with
implicit heap indexing (no adjacency storage), and the n-by-n torus.  The
exact computations here (cover-time dynamic program, harmonic solves for
hitting probabilities and hitting times) exist to validate the Monte Carlo
engine on instances small enough to solve directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, UsageError

# Exact-oracle limits: the cover-time DP enumerates (vertex, visited-set)
# states, the harmonic solver factors a sparse linear system.
DP_VERTEX_CAP = 16
HARMONIC_VERTEX_CAP = 10_000


@dataclass(frozen=True)
class TreeTopology:
    """Balanced b-ary tree of height k, vertices 0..n_k-1 in level order.

    Children of vertex ``i`` are ``b*i + 1 .. b*i + b``; the parent of
    ``i > 0`` is ``(i - 1) // b``.  The root has degree b, internal vertices
    degree b + 1, and the ``b**k`` leaves degree 1.
    """

    b: int
    k: int

    def __post_init__(self):
        if not isinstance(self.b, int) or self.b < 2:
            raise UsageError(f"branching factor must be an integer >= 2, got {self.b!r}")
        if not isinstance(self.k, int) or self.k < 1:
            raise UsageError(f"tree height must be an integer >= 1, got {self.k!r}")

    @property
    def n_k(self) -> int:
        return (self.b ** (self.k + 1) - 1) // (self.b - 1)

    @property
    def first_leaf(self) -> int:
        return (self.b**self.k - 1) // (self.b - 1)

    @property
    def leaf_count(self) -> int:
        return self.b**self.k

    def is_leaf(self, v: int) -> bool:
        self._check_vertex(v)
        return v >= self.first_leaf

    def parent(self, v: int) -> int:
        self._check_vertex(v)
        if v == 0:
            raise UsageError("the root has no parent")
        return (v - 1) // self.b

    def children(self, v: int) -> list[int]:
        self._check_vertex(v)
        if v >= self.first_leaf:
            return []
        return [self.b * v + c for c in range(1, self.b + 1)]

    def level(self, v: int) -> int:
        self._check_vertex(v)
        lvl = 0
        while v > 0:
            v = (v - 1) // self.b
            lvl += 1
        return lvl

    def ancestor(self, v: int, distance: int) -> int:
        """Ancestor ``distance`` levels above ``v``."""
        self._check_vertex(v)
        if distance < 0:
            raise UsageError("ancestor distance must be nonnegative")
        for _ in range(distance):
            if v == 0:
                raise UsageError("vertex has no ancestor at the requested distance")
            v = (v - 1) // self.b
        return v

    def descendant(self, v: int, distance: int) -> int:
        """Descendant ``distance`` levels below ``v`` along the leftmost child line."""
        self._check_vertex(v)
        for _ in range(distance):
            if v >= self.first_leaf:
                raise UsageError("vertex has no descendant at the requested distance")
            v = self.b * v + 1
        return v

    def degree(self, v: int) -> int:
        return len(tree_neighbors(self, v))

    def levels(self) -> np.ndarray:
        """Level of every vertex, as one array (root-first, int8)."""
        out = np.empty(self.n_k, dtype=np.int8)
        out[0] = 0
        lo, lvl = 1, 1
        while lo < self.n_k:
            hi = min(self.n_k, lo * self.b + 1)
            out[lo:hi] = lvl
            lo, lvl = hi, lvl + 1
        return out

    def _check_vertex(self, v: int):
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self.n_k:
            raise UsageError(f"vertex index {v!r} out of range [0, {self.n_k})")


@dataclass(frozen=True)
class TorusTopology:
    """n-by-n lattice torus; each vertex (x, y) has 4 wrap-around neighbors."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 3:
            raise UsageError(f"torus side must be an integer >= 3, got {self.n!r}")

    @property
    def vertex_count(self) -> int:
        return self.n * self.n

    def neighbors(self, p: tuple[int, int]) -> list[tuple[int, int]]:
        """The 4 neighbors, in fixed order (+x, -x, +y, -y)."""
        x, y = self._check_point(p)
        n = self.n
        return [((x + 1) % n, y), ((x - 1) % n, y), (x, (y + 1) % n), (x, (y - 1) % n)]

    def flat_index(self, p: tuple[int, int]) -> int:
        x, y = self._check_point(p)
        return x * self.n + y

    def wrapped_displacement(self, p: tuple[int, int], q: tuple[int, int]) -> tuple[int, int]:
        """Coordinate-wise shortest signed displacement from q to p."""
        n = self.n
        half = n // 2
        dx = (p[0] - q[0] + half) % n - half
        dy = (p[1] - q[1] + half) % n - half
        return dx, dy

    def distance(self, p: tuple[int, int], q: tuple[int, int]) -> float:
        """Euclidean metric on the shortest wrapped displacement."""
        dx, dy = self.wrapped_displacement(p, q)
        return math.hypot(dx, dy)

    def _check_point(self, p) -> tuple[int, int]:
        x, y = p
        if not (0 <= x < self.n and 0 <= y < self.n):
            raise UsageError(f"point {p!r} outside torus of side {self.n}")
        return int(x), int(y)


@dataclass(frozen=True)
class DiscSpec:
    """Closed disc on a torus: membership is wrapped distance <= radius."""

    center: tuple[int, int]
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise UsageError("disc radius must be nonnegative")

    def contains(self, p: tuple[int, int], torus: TorusTopology) -> bool:
        return torus.distance(p, self.center) <= self.radius


def tree_neighbors(t: TreeTopology, v: int) -> list[int]:
    """Neighbors of ``v``: parent first (if any), then children ascending."""
    t._check_vertex(v)
    out = [] if v == 0 else [(v - 1) // t.b]
    if v < t.first_leaf:
        out.extend(t.b * v + c for c in range(1, t.b + 1))
    return out


def _neighbor_lists(topology) -> list[list[int]]:
    if isinstance(topology, TreeTopology):
        return [tree_neighbors(topology, v) for v in range(topology.n_k)]
    if isinstance(topology, TorusTopology):
        n = topology.n
        return [
            [topology.flat_index(q) for q in topology.neighbors((i // n, i % n))]
            for i in range(n * n)
        ]
    raise UsageError(f"unsupported topology {type(topology).__name__}")


def _start_index(topology, start) -> int:
    if isinstance(topology, TreeTopology):
        topology._check_vertex(start)
        return int(start)
    return topology.flat_index(start)


def exact_cover_time(topology, start) -> float:
    """Exact expected cover time by dynamic programming over visited sets.

    Solves, for every reachable (current vertex, visited set) state, the
    linear equations E[v, S] = 1 + mean over neighbors u of E[u, S | {u}],
    sweeping visited sets from full to the initial singleton so each sweep
    only couples states sharing one set.  The start vertex counts as visited
    at time 0; the answer is the expected first time the set is full.
    """
    adj = _neighbor_lists(topology)
    nv = len(adj)
    if nv > DP_VERTEX_CAP:
        raise CapacityError(
            f"exact cover-time DP supports at most {DP_VERTEX_CAP} vertices, got {nv}"
        )
    s0 = _start_index(topology, start)
    full = (1 << nv) - 1

    # masks in decreasing popcount so every referenced larger set is solved
    masks = sorted(
        (m for m in range(full + 1) if m & (1 << s0)),
        key=lambda m: bin(m).count("1"),
        reverse=True,
    )
    value = {}
    for mask in masks:
        members = [v for v in range(nv) if mask & (1 << v)]
        if mask == full:
            for v in members:
                value[(v, mask)] = 0.0
            continue
        idx = {v: i for i, v in enumerate(members)}
        m = len(members)
        a = np.zeros((m, m))
        rhs = np.ones(m)
        for v in members:
            i = idx[v]
            a[i, i] = 1.0
            inv_deg = 1.0 / len(adj[v])
            for u in adj[v]:
                if mask & (1 << u):
                    a[i, idx[u]] -= inv_deg
                else:
                    rhs[i] += inv_deg * value[(u, mask | (1 << u))]
        sol = np.linalg.solve(a, rhs)
        for v in members:
            value[(v, mask)] = float(sol[idx[v]])
    return value[(s0, 1 << s0)]


def _harmonic_solve(t: TreeTopology, boundary: dict[int, float], rhs_const: float) -> np.ndarray:
    """Solve h(v) = rhs_const + mean_u h(u) off the boundary, h fixed on it.

    With rhs_const = 0 this gives hitting probabilities, with 1 expected
    hitting times.  Sparse direct factorization (SuperLU, partial pivoting).
    """
    nv = t.n_k
    if nv > HARMONIC_VERTEX_CAP:
        raise CapacityError(
            f"harmonic solver supports at most {HARMONIC_VERTEX_CAP} vertices, got {nv}"
        )
    free = [v for v in range(nv) if v not in boundary]
    pos = {v: i for i, v in enumerate(free)}
    m = len(free)
    rows, cols, vals = [], [], []
    rhs = np.full(m, rhs_const)
    for v in free:
        i = pos[v]
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        nbrs = tree_neighbors(t, v)
        w = 1.0 / len(nbrs)
        for u in nbrs:
            if u in boundary:
                rhs[i] += w * boundary[u]
            else:
                rows.append(i)
                cols.append(pos[u])
                vals.append(-w)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    sol = spla.spsolve(a, rhs)
    out = np.empty(nv)
    for v, h in boundary.items():
        out[v] = h
    out[free] = sol
    return out


def exact_hit_before_return(t: TreeTopology, target: int) -> float:
    """P[walk from the root reaches ``target`` before re-entering the root].

    For a leaf at level k this equals 1/(b*k).
    """
    t._check_vertex(target)
    if target == 0:
        raise UsageError("target must differ from the root")
    h = _harmonic_solve(t, {target: 1.0, 0: 0.0}, 0.0)
    nbrs = tree_neighbors(t, 0)
    return float(sum(h[u] for u in nbrs) / len(nbrs))


def exact_hit_before(t: TreeTopology, start: int, target: int, before: int) -> float:
    """P[walk from ``start`` hits ``target`` before hitting ``before``]."""
    for v in (start, target, before):
        t._check_vertex(v)
    if target == before:
        raise UsageError("target and taboo vertex must differ")
    h = _harmonic_solve(t, {target: 1.0, before: 0.0}, 0.0)
    return float(h[start])


def exact_hitting_times_to(t: TreeTopology, target: int) -> np.ndarray:
    """Exact expected hitting times of ``target`` from every vertex at once."""
    t._check_vertex(target)
    return _harmonic_solve(t, {target: 0.0}, 1.0)


def exact_hitting_time(t: TreeTopology, source: int, target: int) -> float:
    """Exact expected number of steps from ``source`` to first hit ``target``."""
    t._check_vertex(source)
    return float(exact_hitting_times_to(t, target)[source])


def commute_time_bound(t: TreeTopology) -> float:
    """Uniform bound 4*k*n_k on expected hitting times between vertex pairs.

    Hitting time is at most the commute time, which equals the effective
    resistance (at most 2k here) times twice the number of edges (n_k - 1).
    """
    return 4.0 * t.k * t.n_k


@lru_cache(maxsize=None)
def _cached_levels(b: int, k: int) -> np.ndarray:
    arr = TreeTopology(b, k).levels()
    arr.setflags(write=False)
    return arr
