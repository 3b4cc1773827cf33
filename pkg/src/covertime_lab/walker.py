"""Seeded random-walk simulators and the records they produce.

The fast paths are numba kernels (trees, torus) and a vectorized numpy
pipeline (unbounded lattice).  Each consumes exactly one PRNG output per
step, so the generator-based reference walkers here reproduce the same
trajectories bit-for-bit; tests rely on that to cross-check the kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import ndimage

from . import _kernels, rng
from .errors import StepCapExceeded, UsageError
from .graphs import TorusTopology, TreeTopology


@dataclass(frozen=True)
class Lattice2D:
    """Marker topology: the unbounded planar lattice, walks start at (0, 0)."""


@dataclass(frozen=True)
class WalkConfig:
    """Everything that determines one trajectory, bit-for-bit.

    ``step_cap`` defaults to roughly 100x the theoretical mean duration of
    the experiment the topology implies, so hitting it is a loggable anomaly
    rather than a truncation bias.
    """

    topology: TreeTopology | TorusTopology | Lattice2D
    start: object = None
    seed: int = 0
    step_cap: int | None = None

    def __post_init__(self):
        if self.step_cap is not None and self.step_cap <= 0:
            raise UsageError("step_cap must be positive")

    def resolved_start(self):
        if self.start is not None:
            return self.start
        if isinstance(self.topology, TreeTopology):
            return 0
        return (0, 0)

    def resolved_cap(self) -> int:
        if self.step_cap is not None:
            return self.step_cap
        return default_step_cap(self.topology)


def default_step_cap(topology) -> int:
    if isinstance(topology, TreeTopology):
        t = topology
        return int(math.ceil(100.0 * t.n_k * t.k**2 * math.log(t.b)))
    if isinstance(topology, TorusTopology):
        n = topology.n
        return int(math.ceil(100.0 * (4.0 / math.pi) * (n * math.log(n)) ** 2))
    raise UsageError("lattice walks take an explicit step count, not a cap")


@dataclass(frozen=True)
class TreeCoverRecord:
    """Cover summary of one tree replica: C_k, C_k+, and the return count R_k."""

    cover_time: int
    cover_and_return_time: int
    returns_to_root: int

    def __post_init__(self):
        if self.cover_and_return_time < self.cover_time:
            raise UsageError("cover-and-return time cannot precede the cover time")
        if self.returns_to_root < 1:
            raise UsageError("a completed record has at least one root return")


class VisitField:
    """Sparse visit counts of a lattice walk; absent sites have count 0.

    Stores sorted packed keys plus counts; the packing is
    ``(x + 2^31) << 32 | (y + 2^31)`` as uint64.
    """

    _OFF = np.int64(1) << np.int64(31)

    def __init__(self, keys: np.ndarray, counts: np.ndarray, total_steps: int):
        self._keys = keys
        self._counts = counts
        self.total_steps = int(total_steps)

    @property
    def max_count(self) -> int:
        return int(self._counts.max())

    @property
    def site_count(self) -> int:
        return len(self._keys)

    @property
    def total_visits(self) -> int:
        return int(self._counts.sum())

    def count(self, x: int, y: int) -> int:
        key = np.uint64((int(x) + (1 << 31)) << 32 | (int(y) + (1 << 31)))
        i = np.searchsorted(self._keys, key)
        if i < len(self._keys) and self._keys[i] == key:
            return int(self._counts[i])
        return 0

    def items(self) -> Iterator[tuple[tuple[int, int], int]]:
        for key, c in zip(self._keys, self._counts):
            x = int(key >> np.uint64(32)) - (1 << 31)
            y = int(key & np.uint64(0xFFFFFFFF)) - (1 << 31)
            yield (x, y), int(c)


def _require_topology(cfg: WalkConfig, kind, what: str):
    if not isinstance(cfg.topology, kind):
        raise UsageError(f"{what} requires a {kind.__name__} topology")


def run_tree_cover(cfg: WalkConfig) -> TreeCoverRecord:
    """Walk from the root until the tree is covered and the root re-entered.

    The start vertex counts as visited at time 0; returns_to_root counts
    root visits at times 1..C_k+ (the final return included).  Every replica
    also checks that the cover time equals the time all leaves are covered.
    """
    _require_topology(cfg, TreeTopology, "run_tree_cover")
    t = cfg.topology
    if cfg.resolved_start() != 0:
        raise UsageError("tree cover walks must start at the root")
    cover, leaf_cover, cplus, returns, steps, status = _kernels.tree_cover_kernel(
        t.b, t.k, t.n_k, t.first_leaf, np.uint64(cfg.seed & rng.MASK64), cfg.resolved_cap()
    )
    if status != _kernels.OK:
        raise StepCapExceeded(
            f"tree cover walk hit the step cap ({steps} steps)",
            partial={
                "cover_time": int(cover) if cover >= 0 else None,
                "returns_to_root": int(returns),
                "steps": int(steps),
            },
        )
    if cover != leaf_cover:
        raise AssertionError(
            f"covering time {cover} disagrees with leaf covering time {leaf_cover}"
        )
    return TreeCoverRecord(int(cover), int(cplus), int(returns))


def torus_first_visits(cfg: WalkConfig) -> np.ndarray:
    """(n, n) array of first-visit times for a torus walk run to full cover."""
    _require_topology(cfg, TorusTopology, "torus_first_visits")
    n = cfg.topology.n
    sx, sy = cfg.topology._check_point(cfg.resolved_start())
    fv, steps, status = _kernels.torus_first_visit_kernel(
        n, sx, sy, np.uint64(cfg.seed & rng.MASK64), cfg.resolved_cap()
    )
    if status != _kernels.OK:
        visited = int((fv >= 0).sum())
        raise StepCapExceeded(
            f"torus walk hit the step cap with {visited}/{n * n} sites visited",
            partial={"visited": visited, "steps": int(steps)},
        )
    return fv.reshape(n, n)


def run_torus_cover(cfg: WalkConfig) -> int:
    """First time all n^2 torus sites have been visited."""
    return int(torus_first_visits(cfg).max())


def run_thick_points(steps: int, seed: int, chunk: int = 1 << 22) -> VisitField:
    """Walk ``steps`` steps on the unbounded lattice; return the visit field.

    Positions at times 0..steps each contribute one visit, so the counts sum
    to steps + 1.  Processes the trajectory in chunks: per-chunk site counts
    via sort, then one merge, keeping memory O(distinct sites + chunk).
    """
    if steps < 1:
        raise UsageError("step count must be >= 1")
    off = VisitField._OFF
    x = np.int64(0)
    y = np.int64(0)
    origin = (np.uint64(off) << np.uint64(32)) | np.uint64(off)
    part_keys = [np.array([origin], dtype=np.uint64)]
    part_counts = [np.array([1], dtype=np.int64)]
    done = 0
    while done < steps:
        m = int(min(chunk, steps - done))
        code = (rng.outputs(seed, done, m) >> np.uint64(62)).astype(np.int8)
        dx = np.where(code == 0, 1, np.where(code == 1, -1, 0)).astype(np.int32)
        dy = np.where(code == 2, 1, np.where(code == 3, -1, 0)).astype(np.int32)
        xs = x + np.cumsum(dx, dtype=np.int64)
        ys = y + np.cumsum(dy, dtype=np.int64)
        x = np.int64(xs[-1])
        y = np.int64(ys[-1])
        keys = ((xs + off).astype(np.uint64) << np.uint64(32)) | (ys + off).astype(np.uint64)
        uk, cnt = np.unique(keys, return_counts=True)
        part_keys.append(uk)
        part_counts.append(cnt.astype(np.int64))
        done += m
    if len(part_keys) == 1:
        keys, counts = part_keys[0], part_counts[0]
    else:
        all_keys = np.concatenate(part_keys)
        all_counts = np.concatenate(part_counts)
        keys, inverse = np.unique(all_keys, return_inverse=True)
        counts = np.bincount(inverse, weights=all_counts).astype(np.int64)
    return VisitField(keys, counts, steps)


def disc_footprint(radius: float) -> np.ndarray:
    """Boolean mask of lattice offsets within Euclidean distance ``radius``."""
    r = int(math.floor(radius))
    g = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(g, g, indexing="ij")
    return (dx * dx + dy * dy) <= radius * radius


def eps_cover_time_from_field(first_visit: np.ndarray, eps: float) -> int:
    """Step at which discs of radius eps*n around visited sites cover the torus.

    For each site x the first entry of the walk into the disc around x is the
    minimum first-visit time over the disc, so the last site to be disc-
    covered is a wrapped minimum-filter followed by a max.
    """
    n = first_visit.shape[0]
    foot = disc_footprint(eps * n)
    entry = ndimage.minimum_filter(first_visit, footprint=foot, mode="wrap")
    return int(entry.max())


def run_eps_cover_proxy(n: int, eps: float, seed: int, step_cap: int | None = None) -> float:
    """Normalized time for eps-discs around the walk to cover the torus.

    Runs the torus walk (diffusively scaled: each lattice step advances
    Brownian time by 1/(2 n^2), the per-step coordinate variance) and returns
    the disc-cover step count divided by 2 n^2.
    """
    if not 0.0 < eps < 0.5:
        raise UsageError("eps must lie in (0, 1/2)")
    if eps * n < 2.0:
        raise UsageError(f"eps*n = {eps * n:.3f} < 2: disc holds too few lattice points")
    fv = torus_first_visits(WalkConfig(TorusTopology(n), seed=seed, step_cap=step_cap))
    return eps_cover_time_from_field(fv, eps) / (2.0 * n * n)


# --- reference walkers -----------------------------------------------------
#
# Straightforward generator implementations of the same step rules; slow but
# independent of the kernels, and the trajectory source for oracle recounts.


def iter_tree_walk(t: TreeTopology, seed: int) -> Iterator[int]:
    """Positions of the tree walk at times 0, 1, 2, ... (one draw per step)."""
    stream = rng.ScalarStream(seed)
    v = 0
    first_leaf = t.first_leaf
    b = t.b
    yield v
    while True:
        z = stream.next_output()
        if v == 0:
            v = 1 + rng.index_below(z, b)
        elif v >= first_leaf:
            v = (v - 1) // b
        else:
            idx = rng.index_below(z, b + 1)
            v = (v - 1) // b if idx == 0 else b * v + idx
        yield v


def iter_torus_walk(
    t: TorusTopology, seed: int, start: tuple[int, int] = (0, 0)
) -> Iterator[tuple[int, int]]:
    """Positions of the torus walk at times 0, 1, 2, ..."""
    x, y = t._check_point(start)
    n = t.n
    stream = rng.ScalarStream(seed)
    yield (x, y)
    while True:
        code = stream.next_output() >> 62
        if code == 0:
            x = (x + 1) % n
        elif code == 1:
            x = (x - 1) % n
        elif code == 2:
            y = (y + 1) % n
        else:
            y = (y - 1) % n
        yield (x, y)


def iter_lattice_walk(seed: int) -> Iterator[tuple[int, int]]:
    """Positions of the unbounded lattice walk at times 0, 1, 2, ..."""
    x = y = 0
    stream = rng.ScalarStream(seed)
    yield (x, y)
    while True:
        code = stream.next_output() >> 62
        if code == 0:
            x += 1
        elif code == 1:
            x -= 1
        elif code == 2:
            y += 1
        else:
            y -= 1
        yield (x, y)
