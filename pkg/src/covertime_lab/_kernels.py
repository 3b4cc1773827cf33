"""Numba inner loops for the walk simulators.

Every kernel consumes the SplitMix64 stream sequentially (one output per
step) exactly like the pure-Python reference walkers in ``walker``; tests
pin the two paths to each other.  Status codes: 0 = stopped by rule,
1 = step cap hit first.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)

OK = 0
CAP = 1


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _tree_step(v, z, b, first_leaf):
    # neighbor order: parent first, then children ascending
    u53 = z >> U64(11)
    if v == 0:
        return 1 + np.int64((u53 * U64(b)) >> U64(53))
    if v >= first_leaf:
        return (v - 1) // b
    idx = np.int64((u53 * U64(b + 1)) >> U64(53))
    if idx == 0:
        return (v - 1) // b
    return b * v + idx


@njit(cache=True)
def tree_cover_kernel(b, k, n_k, first_leaf, seed, step_cap):
    """Walk from the root until covered and back at the root.

    Returns (cover_time, leaf_cover_time, cover_and_return_time,
    returns_to_root, steps_done, status); times are -1 if not reached.
    """
    visited = np.zeros(n_k, dtype=np.uint8)
    visited[0] = 1
    remaining = n_k - 1
    leaves_remaining = n_k - first_leaf
    cover_t = np.int64(-1)
    leaf_cover_t = np.int64(-1)
    returns = np.int64(0)
    v = np.int64(0)
    s = U64(seed)
    t = np.int64(0)
    while t < step_cap:
        t += 1
        s += _GAMMA
        v = _tree_step(v, _mix64(s), b, first_leaf)
        if visited[v] == 0:
            visited[v] = 1
            remaining -= 1
            if v >= first_leaf:
                leaves_remaining -= 1
                if leaves_remaining == 0:
                    leaf_cover_t = t
            if remaining == 0:
                cover_t = t
        if v == 0:
            returns += 1
            if remaining == 0:
                return cover_t, leaf_cover_t, t, returns, t, OK
    return cover_t, leaf_cover_t, np.int64(-1), returns, t, CAP


@njit(cache=True)
def leaf_race_kernel(b, k, n_k, first_leaf, target, trials, seed):
    """Count races (from the root) won by ``target`` before a root return."""
    hits = np.int64(0)
    s = U64(seed)
    for _ in range(trials):
        v = np.int64(0)
        while True:
            s += _GAMMA
            v = _tree_step(v, _mix64(s), b, first_leaf)
            if v == target:
                hits += 1
                break
            if v == 0:
                break
    return hits


@njit(cache=True)
def tree_pair_excursion_kernel(
    b, k, n_k, first_leaf, inner, outer, root_visit_stop, step_stop, seed, step_cap
):
    """Count inner->outer->inner crossings until a stopping rule fires.

    A crossing completes at each entry to ``inner`` that follows an entry to
    ``outer``; the position at time 0 counts as an entry.  Exactly one of
    ``root_visit_stop`` (stop at that many visits to the root at times >= 1)
    and ``step_stop`` is positive.  Returns (count, steps_done, root_visits,
    status).
    """
    count = np.int64(0)
    root_visits = np.int64(0)
    armed = False
    v = np.int64(0)
    if v == outer:
        armed = True
    elif v == inner:
        armed = False
    s = U64(seed)
    t = np.int64(0)
    while t < step_cap:
        if step_stop > 0 and t >= step_stop:
            return count, t, root_visits, OK
        t += 1
        s += _GAMMA
        v = _tree_step(v, _mix64(s), b, first_leaf)
        if v == outer:
            armed = True
        elif v == inner:
            if armed:
                count += 1
            armed = False
        if v == 0:
            root_visits += 1
            if root_visit_stop > 0 and root_visits >= root_visit_stop:
                return count, t, root_visits, OK
    return count, t, root_visits, CAP


@njit(cache=True)
def special_counts_kernel(
    b, k, n_k, first_leaf, ell, levels, pair_anc, root_visit_stop, seed, step_cap
):
    """Ancestor-excursion counts for every checkpoint vertex, by one pass.

    ``pair_anc[v]`` is the ancestor ``ell`` levels above ``v`` for vertices at
    checkpoint levels (k - j*ell) that have one, else -1.  For each such pair
    the alternating-crossing count by the stopping time is accumulated via
    last-event timestamps, which reproduces a per-pair scan of the same walk.
    Returns (counts, steps_done, root_visits, status).
    """
    counts = np.zeros(n_k, dtype=np.int64)
    last_outer = np.full(n_k, np.int64(-1))
    last_inner = np.full(n_k, np.int64(-1))
    root_visits = np.int64(0)
    v = np.int64(0)
    # time-0 presence at the root is an event
    d = np.int64(k) - np.int64(levels[v])
    if d % ell == 0:
        last_outer[v] = 0
    s = U64(seed)
    t = np.int64(0)
    while t < step_cap:
        t += 1
        s += _GAMMA
        v = _tree_step(v, _mix64(s), b, first_leaf)
        d = np.int64(k) - np.int64(levels[v])
        if d % ell == 0:
            a = pair_anc[v]
            if a >= 0:
                if last_outer[a] > last_inner[v]:
                    counts[v] += 1
                last_inner[v] = t
            last_outer[v] = t
        if v == 0:
            root_visits += 1
            if root_visits >= root_visit_stop:
                return counts, t, root_visits, OK
    return counts, t, root_visits, CAP


@njit(cache=True)
def symmetry_race_kernel(b, k, n_k, first_leaf, v0, w, a, trials, seed):
    """From v0, race to the descendant w vs the ancestor a; count who wins."""
    w_first = np.int64(0)
    a_first = np.int64(0)
    s = U64(seed)
    for _ in range(trials):
        v = v0
        while True:
            s += _GAMMA
            v = _tree_step(v, _mix64(s), b, first_leaf)
            if v == w:
                w_first += 1
                break
            if v == a:
                a_first += 1
                break
    return w_first, a_first


@njit(cache=True)
def torus_first_visit_kernel(n, sx, sy, seed, step_cap):
    """First-visit time of every torus site; -1 where never reached.

    Returns (first_visit flat array, steps_done, status); status is OK once
    all sites have been visited.
    """
    fv = np.full(n * n, np.int64(-1))
    x = np.int64(sx)
    y = np.int64(sy)
    fv[x * n + y] = 0
    remaining = np.int64(n * n - 1)
    s = U64(seed)
    t = np.int64(0)
    while t < step_cap:
        t += 1
        s += _GAMMA
        code = _mix64(s) >> U64(62)
        if code == U64(0):
            x += 1
            if x == n:
                x = 0
        elif code == U64(1):
            x -= 1
            if x < 0:
                x = n - 1
        elif code == U64(2):
            y += 1
            if y == n:
                y = 0
        else:
            y -= 1
            if y < 0:
                y = n - 1
        flat = x * n + y
        if fv[flat] < 0:
            fv[flat] = t
            remaining -= 1
            if remaining == 0:
                return fv, t, OK
    return fv, t, CAP


@njit(cache=True)
def tree_walk_codes_kernel(b, k, n_k, first_leaf, seed, n_steps, out_codes):
    """Replay a tree walk writing the neighbor-order code of each step.

    Codes index the deterministic neighbor order of the current vertex
    (parent first, then children ascending); they fit 2 bits only for b <= 3.
    """
    v = np.int64(0)
    s = U64(seed)
    for t in range(n_steps):
        s += _GAMMA
        z = _mix64(s)
        u53 = z >> U64(11)
        if v == 0:
            idx = np.int64((u53 * U64(b)) >> U64(53))
            out_codes[t] = np.uint8(idx)  # root: children only
            v = 1 + idx
        elif v >= first_leaf:
            out_codes[t] = np.uint8(0)  # leaf: parent, no draw
            v = (v - 1) // b
        else:
            idx = np.int64((u53 * U64(b + 1)) >> U64(53))
            out_codes[t] = np.uint8(idx)
            v = (v - 1) // b if idx == 0 else b * v + idx
    return v
