import math

import pytest
from hypothesis import given, settings, strategies as st

from covertime_lab.errors import CapacityError, UsageError
from covertime_lab.graphs import (
    DiscSpec,
    TorusTopology,
    TreeTopology,
    commute_time_bound,
    exact_cover_time,
    exact_hit_before,
    exact_hit_before_return,
    exact_hitting_time,
    exact_hitting_times_to,
    tree_neighbors,
)


class TestTreeTopology:
    def test_vertex_count_formula(self):
        for b in (2, 3, 4):
            for k in range(1, 6):
                t = TreeTopology(b, k)
                assert t.n_k == (b ** (k + 1) - 1) // (b - 1)
                by_level = sum(b**lvl for lvl in range(k + 1))
                assert by_level == t.n_k
                assert t.leaf_count == b**k

    def test_rejects_degenerate(self):
        with pytest.raises(UsageError):
            TreeTopology(2, 0)
        with pytest.raises(UsageError):
            TreeTopology(1, 3)

    def test_neighbor_examples(self):
        assert tree_neighbors(TreeTopology(2, 2), 0) == [1, 2]
        assert tree_neighbors(TreeTopology(2, 2), 1) == [0, 3, 4]
        assert tree_neighbors(TreeTopology(3, 1), 2) == [0]

    def test_neighbors_out_of_range(self):
        with pytest.raises(UsageError):
            tree_neighbors(TreeTopology(2, 2), 7)
        with pytest.raises(UsageError):
            tree_neighbors(TreeTopology(2, 2), -1)

    @given(
        b=st.integers(min_value=2, max_value=4),
        k=st.integers(min_value=1, max_value=5),
        data=st.data(),
    )
    @settings(max_examples=60)
    def test_neighbor_symmetry(self, b, k, data):
        t = TreeTopology(b, k)
        v = data.draw(st.integers(min_value=0, max_value=t.n_k - 1))
        for u in tree_neighbors(t, v):
            assert v in tree_neighbors(t, u)

    def test_degrees(self):
        t = TreeTopology(3, 2)
        assert t.degree(0) == 3
        assert t.degree(1) == 4
        assert t.degree(t.first_leaf) == 1

    def test_levels_array(self):
        t = TreeTopology(2, 3)
        levels = t.levels()
        assert [t.level(v) for v in range(t.n_k)] == levels.tolist()

    def test_ancestor_descendant(self):
        t = TreeTopology(2, 4)
        v = t.descendant(0, 3)
        assert t.level(v) == 3
        assert t.ancestor(v, 3) == 0
        with pytest.raises(UsageError):
            t.ancestor(1, 2)
        with pytest.raises(UsageError):
            t.descendant(t.first_leaf, 1)


class TestTorus:
    def test_four_neighbors_wrap(self):
        t = TorusTopology(3)
        assert t.neighbors((0, 0)) == [(1, 0), (2, 0), (0, 1), (0, 2)]
        for p in [(0, 0), (2, 2), (1, 2)]:
            assert len(set(t.neighbors(p))) == 4

    def test_rejects_small(self):
        with pytest.raises(UsageError):
            TorusTopology(2)

    def test_wrapped_distance(self):
        t = TorusTopology(10)
        assert t.distance((0, 0), (9, 0)) == 1.0
        assert t.distance((1, 1), (9, 9)) == pytest.approx(math.hypot(2, 2))

    def test_disc_membership(self):
        t = TorusTopology(16)
        disc = DiscSpec(center=(0, 0), radius=2.0)
        assert disc.contains((0, 2), t)
        assert disc.contains((15, 0), t)
        assert not disc.contains((2, 2), t)


class TestExactCoverTime:
    def test_star_closed_form(self):
        # two-leaf star: excursions are 2 steps, coupon collecting both leaves
        # takes 3 excursions in expectation, covering hits 1 step into the last
        assert exact_cover_time(TreeTopology(2, 1), 0) == pytest.approx(5.0, abs=1e-9)

    def test_start_dependence(self):
        t = TreeTopology(2, 2)
        from_root = exact_cover_time(t, 0)
        from_leaf = exact_cover_time(t, 3)
        assert from_root > 0 and from_leaf > 0
        assert from_root != pytest.approx(from_leaf, abs=1e-6)

    def test_capacity_cap(self):
        with pytest.raises(CapacityError):
            exact_cover_time(TreeTopology(2, 4), 0)  # 31 vertices
        with pytest.raises(CapacityError):
            exact_cover_time(TorusTopology(5), (0, 0))

    def test_torus3_matches_every_start(self):
        # translation invariance of the torus makes all starts equivalent
        t = TorusTopology(3)
        v0 = exact_cover_time(t, (0, 0))
        v1 = exact_cover_time(t, (1, 2))
        assert v0 == pytest.approx(v1, abs=1e-8)


class TestHarmonicOracles:
    @pytest.mark.parametrize("b", [2, 3, 4])
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_leaf_hit_probability_formula(self, b, k):
        t = TreeTopology(b, k)
        leaf = t.n_k - 1
        assert exact_hit_before_return(t, leaf) == pytest.approx(1.0 / (b * k), abs=1e-9)

    def test_two_leaf_star_is_half(self):
        assert exact_hit_before_return(TreeTopology(2, 1), 1) == pytest.approx(0.5, abs=1e-12)

    def test_root_target_rejected(self):
        with pytest.raises(UsageError):
            exact_hit_before_return(TreeTopology(2, 2), 0)

    def test_hit_before_two_targets_sum_to_one(self):
        t = TreeTopology(2, 5)
        v = t.descendant(0, 2)
        w = t.descendant(v, 2)
        a = 0
        p = exact_hit_before(t, v, w, a)
        q = exact_hit_before(t, v, a, w)
        assert p + q == pytest.approx(1.0, abs=1e-10)
        assert p == pytest.approx(0.5, abs=1e-9)

    def test_hitting_time_star(self):
        # root -> leaf on the 2-star: h = 1 + (0 + (1 + h))/2 gives h = 3,
        # and leaf -> root is 1 step, so the commute time is 4 = 2 * m * R
        t = TreeTopology(2, 1)
        assert exact_hitting_time(t, 0, 1) == pytest.approx(3.0, abs=1e-9)
        assert exact_hitting_time(t, 1, 0) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("b,k", [(2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (3, 3), (3, 4)])
    def test_commute_bound_dominates_all_pairs(self, b, k):
        t = TreeTopology(b, k)
        bound = commute_time_bound(t)
        assert bound == 4.0 * k * t.n_k
        worst = max(exact_hitting_times_to(t, target).max() for target in range(t.n_k))
        assert worst <= bound

    def test_commute_bound_examples(self):
        assert commute_time_bound(TreeTopology(2, 2)) == 56
        assert commute_time_bound(TreeTopology(2, 3)) == 180
