import itertools
import math
import statistics

import numpy as np
import pytest

from covertime_lab.errors import StepCapExceeded, UsageError
from covertime_lab.graphs import TorusTopology, TreeTopology
from covertime_lab.walker import (
    WalkConfig,
    default_step_cap,
    eps_cover_time_from_field,
    iter_lattice_walk,
    iter_torus_walk,
    iter_tree_walk,
    run_eps_cover_proxy,
    run_thick_points,
    run_torus_cover,
    run_tree_cover,
    torus_first_visits,
)


def cover_stats_from_positions(t, positions):
    """Reference cover/return computation by direct scan (oracle)."""
    unvisited = set(range(t.n_k))
    cover = None
    returns = 0
    for time, v in enumerate(positions):
        unvisited.discard(v)
        if cover is None and not unvisited:
            cover = time
        if time >= 1 and v == 0:
            returns += 1
            if cover is not None:
                return cover, time, returns
    raise AssertionError("trajectory too short")


class TestDeterminism:
    def test_tree_records_reproduce(self):
        cfg = WalkConfig(TreeTopology(2, 4), seed=31415)
        assert run_tree_cover(cfg) == run_tree_cover(cfg)

    def test_distinct_seeds_differ(self):
        t = TreeTopology(2, 6)
        a = run_tree_cover(WalkConfig(t, seed=1))
        b = run_tree_cover(WalkConfig(t, seed=2))
        assert a != b

    def test_torus_reproduces(self):
        cfg = WalkConfig(TorusTopology(5), seed=999)
        assert run_torus_cover(cfg) == run_torus_cover(cfg)


class TestKernelMatchesReference:
    """The numba kernels must replay the pure-Python walkers bit-for-bit."""

    @pytest.mark.parametrize("b,k,seed", [(2, 2, 7), (2, 3, 123), (3, 2, 5), (4, 2, 901)])
    def test_tree_cover_against_walk_scan(self, b, k, seed):
        t = TreeTopology(b, k)
        rec = run_tree_cover(WalkConfig(t, seed=seed))
        walk = itertools.islice(iter_tree_walk(t, seed), rec.cover_and_return_time + 1)
        cover, cplus, returns = cover_stats_from_positions(t, walk)
        assert (cover, cplus, returns) == (
            rec.cover_time,
            rec.cover_and_return_time,
            rec.returns_to_root,
        )

    def test_torus_first_visits_against_walk(self):
        topo = TorusTopology(5)
        fv = torus_first_visits(WalkConfig(topo, seed=77))
        steps = int(fv.max())
        ref = np.full((5, 5), -1, dtype=np.int64)
        for time, (x, y) in enumerate(itertools.islice(iter_torus_walk(topo, 77), steps + 1)):
            if ref[x, y] < 0:
                ref[x, y] = time
        assert np.array_equal(fv, ref)

    def test_thick_points_against_walk(self):
        steps = 4000
        field = run_thick_points(steps, seed=4242)
        counts = {}
        for p in itertools.islice(iter_lattice_walk(4242), steps + 1):
            counts[p] = counts.get(p, 0) + 1
        assert dict(field.items()) == counts
        assert field.max_count == max(counts.values())


class TestTreeCover:
    def test_star_identities_every_seed(self):
        # on the 2-star every root return happens at even times and the walk
        # ends at the root, so C+ = 2 R and at least 2 excursions are needed
        for seed in range(200):
            rec = run_tree_cover(WalkConfig(TreeTopology(2, 1), seed=seed))
            assert rec.cover_and_return_time == 2 * rec.returns_to_root
            assert rec.returns_to_root >= 2
            assert rec.cover_and_return_time >= rec.cover_time

    def test_star_means_match_closed_form(self):
        # 2 b H_b = 6 for the cover-and-return time; Wald gives mean R = 3
        n = 30_000
        recs = [run_tree_cover(WalkConfig(TreeTopology(2, 1), seed=s)) for s in range(n)]
        cp = [r.cover_and_return_time for r in recs]
        rr = [r.returns_to_root for r in recs]
        se_cp = statistics.stdev(cp) / math.sqrt(n)
        se_r = statistics.stdev(rr) / math.sqrt(n)
        assert abs(statistics.mean(cp) - 6.0) < 4 * se_cp
        assert abs(statistics.mean(rr) - 3.0) < 4 * se_r
        # Wald: ((2 n_k - 2)/b) mean(R) = 2 mean(R) ~ mean(C+)
        assert 2 * statistics.mean(rr) == pytest.approx(statistics.mean(cp), rel=0.02)

    def test_must_start_at_root(self):
        with pytest.raises(UsageError):
            run_tree_cover(WalkConfig(TreeTopology(2, 2), start=1, seed=0))

    def test_step_cap_carries_partial(self):
        with pytest.raises(StepCapExceeded) as exc:
            run_tree_cover(WalkConfig(TreeTopology(2, 6), seed=3, step_cap=10))
        assert exc.value.partial["steps"] == 10
        assert exc.value.partial["returns_to_root"] >= 0

    def test_default_cap_formula(self):
        t = TreeTopology(2, 3)
        assert default_step_cap(t) == math.ceil(100 * t.n_k * 9 * math.log(2))


class TestTorusCover:
    def test_cover_needs_at_least_eight_moves(self):
        for seed in range(50):
            assert run_torus_cover(WalkConfig(TorusTopology(3), seed=seed)) >= 8

    def test_single_replica_normalized_is_finite(self):
        n = 100
        tn = run_torus_cover(WalkConfig(TorusTopology(n), seed=8))
        norm = tn / (n * math.log(n)) ** 2
        assert 0.1 < norm < 10.0


class TestThickPoints:
    def test_one_step(self):
        field = run_thick_points(1, seed=5)
        assert field.total_visits == 2
        assert field.site_count == 2
        assert field.max_count == 1

    def test_two_step_backtrack_probability(self):
        # enumeration oracle: of the 16 equally likely two-step paths,
        # exactly the 4 immediate backtracks revisit a site
        backtracks = 0
        for c1 in range(4):
            for c2 in range(4):
                moves = {0: (1, 0), 1: (-1, 0), 2: (0, 1), 3: (0, -1)}
                p1 = moves[c1]
                p2 = (p1[0] + moves[c2][0], p1[1] + moves[c2][1])
                counts = {}
                for p in [(0, 0), p1, p2]:
                    counts[p] = counts.get(p, 0) + 1
                if max(counts.values()) == 2:
                    backtracks += 1
        assert backtracks == 4
        n = 40_000
        hits = sum(run_thick_points(2, seed=s).max_count == 2 for s in range(n))
        se = math.sqrt(0.25 * 0.75 / n)
        assert abs(hits / n - 0.25) < 4 * se

    def test_normalization_invariant(self):
        field = run_thick_points(10**6, seed=17)
        assert field.total_visits == 10**6 + 1

    def test_chunking_does_not_change_the_field(self):
        a = run_thick_points(5000, seed=99, chunk=256)
        b = run_thick_points(5000, seed=99, chunk=1 << 22)
        assert dict(a.items()) == dict(b.items())

    def test_count_lookup(self):
        field = run_thick_points(100, seed=1)
        assert field.count(0, 0) >= 1
        assert field.count(10**6, 10**6) == 0

    def test_rejects_zero_steps(self):
        with pytest.raises(UsageError):
            run_thick_points(0, seed=1)


class TestEpsCover:
    def test_rejects_bad_eps(self):
        with pytest.raises(UsageError):
            run_eps_cover_proxy(64, 0.75, seed=1)
        with pytest.raises(UsageError):
            run_eps_cover_proxy(64, 0.5, seed=1)
        with pytest.raises(UsageError):
            run_eps_cover_proxy(64, 0.01, seed=1)  # eps*n < 2

    def test_proxy_below_full_cover(self):
        n, eps, seed = 64, 0.25, 123
        fv = torus_first_visits(WalkConfig(TorusTopology(n), seed=seed))
        proxy = run_eps_cover_proxy(n, eps, seed)
        assert proxy < fv.max() / (2 * n * n)
        # composition equals the public op on the same trajectory
        assert proxy == eps_cover_time_from_field(fv, eps) / (2 * n * n)

    def test_disc_cover_time_is_entry_time_oracle(self):
        # brute-force oracle on a tiny torus: for every site, find the first
        # trajectory time within eps*n, then take the max
        n, eps, seed = 8, 0.3, 3
        topo = TorusTopology(n)
        fv = torus_first_visits(WalkConfig(topo, seed=seed))
        steps = int(fv.max())
        walk = list(itertools.islice(iter_torus_walk(topo, seed), steps + 1))
        radius = eps * n
        worst = 0
        for x in range(n):
            for y in range(n):
                first = next(
                    t for t, p in enumerate(walk) if topo.distance(p, (x, y)) <= radius
                )
                worst = max(worst, first)
        assert eps_cover_time_from_field(fv, eps) == worst
