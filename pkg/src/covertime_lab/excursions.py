"""Excursion counting between nested sets, and "special" vertex classification.

An excursion is one inner -> outer -> inner crossing: it completes at each
entry to the inner set that follows an entry to the outer set (alternating
crossing count; the position at time 0 is an event, the initial sojourn
before any outer visit completes nothing).  On trees the nested pair is
(vertex, ancestor); on the torus it is a pair of concentric closed discs,
where "reaching the outer set" means reaching wrapped distance >= the outer
radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels, rng
from .errors import StepCapExceeded, UsageError
from .graphs import DiscSpec, TorusTopology, TreeTopology, _cached_levels
from .walker import WalkConfig, iter_torus_walk, iter_tree_walk


@dataclass(frozen=True)
class ExcursionSpec:
    """Nested pair to count crossings between.

    Tree mode: ``inner`` is a vertex, ``outer`` one of its ancestors, at
    level distance >= 1.  Torus mode: ``inner``/``outer`` are concentric
    DiscSpecs with inner.radius < outer.radius.
    """

    inner: int | DiscSpec
    outer: int | DiscSpec

    @property
    def tree_mode(self) -> bool:
        return not isinstance(self.inner, DiscSpec)

    def validate(self, topology) -> None:
        if self.tree_mode:
            if not isinstance(topology, TreeTopology):
                raise UsageError("vertex excursion specs need a TreeTopology")
            inner, outer = int(self.inner), int(self.outer)
            topology._check_vertex(inner)
            topology._check_vertex(outer)
            v = inner
            hops = 0
            while v != outer:
                if v == 0:
                    raise UsageError(f"outer vertex {outer} is not an ancestor of {inner}")
                v = (v - 1) // topology.b
                hops += 1
            if hops < 1:
                raise UsageError("inner and outer vertices must differ")
        else:
            if not isinstance(self.outer, DiscSpec):
                raise UsageError("disc excursion specs need DiscSpec inner and outer")
            if not isinstance(topology, TorusTopology):
                raise UsageError("disc excursion specs need a TorusTopology")
            if self.inner.center != self.outer.center:
                raise UsageError("excursion discs must share their center")
            if not self.inner.radius < self.outer.radius:
                raise UsageError("inner disc radius must be smaller than the outer's")


@dataclass(frozen=True)
class SpecialVertexConfig:
    """Parameters of the special-vertex classification.

    ``lam`` is the return-level target (the stopping time is the
    ceil(lam * b * k^2)-th root visit), ``r`` the per-level threshold rate,
    ``ell`` the level spacing.  Requires 0 < lam < r < log(b) and k > 2*ell.
    """

    lam: float
    r: float
    ell: int
    b: int
    k: int

    def __post_init__(self):
        if not 0 < self.lam < self.r < math.log(self.b):
            raise UsageError("need 0 < lambda < r < log(b)")
        if self.ell < 1:
            raise UsageError("level spacing ell must be >= 1")
        if not self.k > 2 * self.ell:
            raise UsageError("need k > 2*ell")

    @property
    def topology(self) -> TreeTopology:
        return TreeTopology(self.b, self.k)

    @property
    def root_visit_stop(self) -> int:
        return math.ceil(self.lam * self.b * self.k**2)

    def threshold(self, j: int) -> float:
        return self.r * self.ell * j * j

    def j_range(self) -> range:
        # w at level k - j*ell paired with its ancestor at k - (j+1)*ell
        return range(0, self.k // self.ell)


@dataclass(frozen=True)
class SpecialClassification:
    """Per-level special-vertex sets plus the raw excursion counts."""

    config: SpecialVertexConfig
    steps: int
    root_visits: int
    excursion_counts: np.ndarray
    special: Mapping[int, frozenset[int]]

    def level_of(self, j: int) -> int:
        return self.config.k - j * self.config.ell

    def counts_by_level(self) -> dict[int, tuple[int, int]]:
        """j -> (number special, number of vertices at that level)."""
        return {
            j: (len(vs), self.config.b ** self.level_of(j)) for j, vs in self.special.items()
        }


def _resolve_stop(steps, root_visits):
    if (steps is None) == (root_visits is None):
        raise UsageError("specify exactly one of steps= or root_visits=")
    if steps is not None and steps < 0:
        raise UsageError("steps must be nonnegative")
    if root_visits is not None and root_visits < 1:
        raise UsageError("root_visits must be >= 1")
    return steps, root_visits


def _scan_positions(positions: Iterable, spec: ExcursionSpec, topology, steps, root_visits) -> int:
    """Single-pass alternating-crossing scan over explicit positions."""
    if spec.tree_mode:
        is_inner = lambda p: p == spec.inner  # noqa: E731
        is_outer = lambda p: p == spec.outer  # noqa: E731
        is_root = lambda p: p == 0  # noqa: E731
    else:
        center = spec.inner.center
        r_in, r_out = spec.inner.radius, spec.outer.radius
        dist = topology.distance
        is_inner = lambda p: dist(p, center) <= r_in  # noqa: E731
        is_outer = lambda p: dist(p, center) >= r_out  # noqa: E731
        is_root = None
    count = 0
    armed = False
    seen_root = 0
    t = -1
    for t, p in enumerate(positions):
        if steps is not None and t > steps:
            t -= 1
            break
        if is_outer(p):
            armed = True
        elif is_inner(p):
            if armed:
                count += 1
            armed = False
        if root_visits is not None and t >= 1 and is_root(p):
            seen_root += 1
            if seen_root >= root_visits:
                break
    if steps is not None and t < steps:
        raise UsageError(f"trajectory ended at time {t}, before the requested {steps} steps")
    if root_visits is not None and seen_root < root_visits:
        raise StepCapExceeded(
            f"trajectory ended after {seen_root}/{root_visits} root visits",
            partial={"count": count, "steps": t},
        )
    return count


def count_excursions(
    source,
    spec: ExcursionSpec,
    *,
    steps: int | None = None,
    root_visits: int | None = None,
    topology=None,
    step_cap: int | None = None,
) -> int:
    """Number of completed inner->outer->inner crossings until the stop rule.

    ``source`` is either a WalkConfig (the trajectory is regenerated from its
    seed; trees take the fast kernel) or an iterable of positions starting at
    time 0 (then ``topology`` must be passed for validation/disc geometry).
    Exactly one of ``steps`` / ``root_visits`` must be given; ``root_visits``
    is tree-only (the stopping time T_lambda).
    """
    steps, root_visits = _resolve_stop(steps, root_visits)
    if isinstance(source, WalkConfig):
        topology = source.topology
        spec.validate(topology)
        if isinstance(topology, TreeTopology):
            t = topology
            cap = step_cap if step_cap is not None else source.resolved_cap()
            if steps is not None:
                cap = max(cap, steps + 1)
            count, steps_done, rv, status = _kernels.tree_pair_excursion_kernel(
                t.b,
                t.k,
                t.n_k,
                t.first_leaf,
                int(spec.inner),
                int(spec.outer),
                int(root_visits or 0),
                int(steps or 0),
                np.uint64(source.seed & rng.MASK64),
                cap,
            )
            if status != _kernels.OK:
                raise StepCapExceeded(
                    f"stop rule not reached within {steps_done} steps",
                    partial={"count": int(count), "steps": int(steps_done)},
                )
            return int(count)
        if root_visits is not None:
            raise UsageError("root-visit stopping applies to tree walks only")
        walk = iter_torus_walk(topology, source.seed, source.resolved_start())
        return _scan_positions(walk, spec, topology, steps, None)
    if topology is None:
        raise UsageError("explicit position sources need topology=")
    spec.validate(topology)
    if root_visits is not None and not isinstance(topology, TreeTopology):
        raise UsageError("root-visit stopping applies to tree walks only")
    return _scan_positions(iter(source), spec, topology, steps, root_visits)


def classify_special(cfg: SpecialVertexConfig, source) -> SpecialClassification:
    """Classify vertices at levels k - j*ell as special or not.

    A vertex w at level k - j*ell is special when its excursion count to its
    ancestor ell levels up, by the time the root has been visited
    ceil(lam*b*k^2) times, is at most r*ell*j^2.  ``source`` is a WalkConfig
    on the matching tree, or an iterable of positions.
    """
    t = cfg.topology
    levels = _cached_levels(cfg.b, cfg.k)
    pair_anc = np.full(t.n_k, -1, dtype=np.int64)
    checkpoint = (cfg.k - levels.astype(np.int64)) % cfg.ell == 0
    for v in np.nonzero(checkpoint)[0]:
        if levels[v] >= cfg.ell:
            pair_anc[v] = t.ancestor(int(v), cfg.ell)

    if isinstance(source, WalkConfig):
        if source.topology != t:
            raise UsageError("walk topology does not match the classification config")
        counts, steps_done, rv, status = _kernels.special_counts_kernel(
            t.b,
            t.k,
            t.n_k,
            t.first_leaf,
            cfg.ell,
            levels,
            pair_anc,
            cfg.root_visit_stop,
            np.uint64(source.seed & rng.MASK64),
            source.resolved_cap(),
        )
        if status != _kernels.OK:
            raise StepCapExceeded(
                f"root was visited only {rv}/{cfg.root_visit_stop} times within the cap",
                partial={"root_visits": int(rv), "steps": int(steps_done)},
            )
    else:
        counts, steps_done, rv = _scan_special(source, cfg, levels, pair_anc)

    special: dict[int, frozenset[int]] = {}
    for j in cfg.j_range():
        level = cfg.k - j * cfg.ell
        lo = (cfg.b**level - 1) // (cfg.b - 1)
        hi = (cfg.b ** (level + 1) - 1) // (cfg.b - 1)
        thr = cfg.threshold(j)
        members = (v for v in range(lo, hi) if counts[v] <= thr)
        special[j] = frozenset(members)
    return SpecialClassification(cfg, int(steps_done), int(rv), counts, special)


def _scan_special(positions, cfg: SpecialVertexConfig, levels, pair_anc):
    """Python mirror of the special-counts kernel, for stored trajectories."""
    n_k = len(levels)
    counts = np.zeros(n_k, dtype=np.int64)
    last_outer = np.full(n_k, -1, dtype=np.int64)
    last_inner = np.full(n_k, -1, dtype=np.int64)
    rv = 0
    t = -1
    for t, v in enumerate(positions):
        if (cfg.k - int(levels[v])) % cfg.ell == 0:
            a = pair_anc[v]
            if a >= 0:
                if last_outer[a] > last_inner[v]:
                    counts[v] += 1
                last_inner[v] = t
            last_outer[v] = t
        if t >= 1 and v == 0:
            rv += 1
            if rv >= cfg.root_visit_stop:
                return counts, t, rv
    raise StepCapExceeded(
        f"trajectory ended after {rv}/{cfg.root_visit_stop} root visits",
        partial={"root_visits": rv, "steps": t},
    )


@dataclass(frozen=True)
class SymmetryCheck:
    """Empirical race frequencies from v to its ell-descendant vs ell-ancestor."""

    descendant: int
    ancestor: int
    trials: int
    freq_descendant_first: float
    freq_ancestor_first: float


def excursion_symmetry_check(
    t: TreeTopology, v: int, ell: int, trials: int, seed: int
) -> SymmetryCheck:
    """Race, from each visit to v, to the fixed ell-descendant vs ell-ancestor.

    The descendant is taken along the leftmost child line.  Each trial
    restarts at v once the previous race resolves (equivalent, by the Markov
    property, to watching successive visits to v).  The two underlying
    probabilities are equal.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    w = t.descendant(v, ell)
    a = t.ancestor(v, ell)
    w_first, a_first = _kernels.symmetry_race_kernel(
        t.b, t.k, t.n_k, t.first_leaf, v, w, a, trials, np.uint64(seed & rng.MASK64)
    )
    return SymmetryCheck(w, a, trials, int(w_first) / trials, int(a_first) / trials)
