import numpy as np
import pytest

import krignet as kn
from krignet.errors import DegenerateDomainError, DuplicateLocationError
from krignet.spatial import _knn_tree, build_conditioning_sets, maxmin_order

from oracles import check_maxmin_property, knn_predecessors_oracle


class TestScaling:
    def test_square_corners(self):
        locs = kn.scale_to_unit_square([(0, 0), (10, 0), (0, 10), (10, 10)])
        assert np.allclose(
            sorted(map(tuple, locs.coords)), [(0, 0), (0, 1), (1, 0), (1, 1)]
        )

    def test_identity_when_already_unit(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.3], [0.2, 1.0]])
        locs = kn.scale_to_unit_square(pts)
        assert np.array_equal(locs.coords, pts)

    def test_common_factor_hand_case(self):
        locs = kn.scale_to_unit_square([(2, 3), (4, 3), (2, 5)])
        assert np.allclose(locs.coords, [(0, 0), (1, 0), (0, 1)])
        assert locs.original_bounds == (2.0, 3.0, 2.0)

    def test_unequal_ranges_use_common_factor(self):
        locs = kn.scale_to_unit_square([(0, 0), (10, 2)])
        assert np.allclose(locs.coords, [(0, 0), (1, 0.2)])

    def test_distance_ratio_preserved(self, rng):
        raw = rng.uniform(-50, 120, (40, 2)) * np.array([3.0, 1.0])
        locs = kn.scale_to_unit_square(raw)
        i, j, k, l = 3, 17, 25, 31
        d = lambda a, x, y: np.linalg.norm(a[x] - a[y])
        r_raw = d(raw, i, j) / d(raw, k, l)
        r_scaled = d(locs.coords, i, j) / d(locs.coords, k, l)
        assert abs(r_raw - r_scaled) < 1e-12

    def test_round_trip(self, rng):
        raw = rng.uniform(-5, 5, (30, 2))
        locs = kn.scale_to_unit_square(raw)
        assert np.allclose(locs.to_raw(locs.coords), raw, atol=1e-12)

    def test_degenerate_domain(self):
        with pytest.raises(DegenerateDomainError):
            kn.scale_to_unit_square([(1.0, 2.0)] * 5)

    def test_duplicates_rejected(self):
        with pytest.raises(DuplicateLocationError):
            kn.scale_to_unit_square([(0, 0), (1, 1), (0, 0)])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kn.scale_to_unit_square([(0, 0)])


class TestMaxminOrder:
    def test_two_points_tiebreak(self):
        locs = kn.LocationSet(np.array([[0.0, 0.0], [1.0, 1.0]]), (0, 0, 1))
        assert list(maxmin_order(locs)) == [0, 1]

    def test_center_first_then_corners(self):
        pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]], dtype=float)
        locs = kn.LocationSet(pts, (0, 0, 1))
        order = list(maxmin_order(locs))
        assert order[0] == 4  # nearest the centroid
        assert order[1:] == [0, 1, 2, 3]  # equidistant corners: index order
        ok, step = check_maxmin_property(pts, order)
        assert ok, f"max-min property violated at step {step}"

    @pytest.mark.parametrize("n", [50, 200])
    def test_maxmin_property_random(self, n):
        coords = np.random.default_rng(n).uniform(0, 1, (n, 2))
        locs = kn.LocationSet(coords, (0, 0, 1))
        order = maxmin_order(locs)
        assert sorted(order) == list(range(n))
        ok, step = check_maxmin_property(coords, order)
        assert ok, f"max-min property violated at step {step}"

    def test_deterministic(self, rng):
        coords = rng.uniform(0, 1, (120, 2))
        locs = kn.LocationSet(coords, (0, 0, 1))
        assert np.array_equal(maxmin_order(locs), maxmin_order(locs))


class TestConditioningSets:
    def test_first_site_empty(self, small_graph):
        assert small_graph.lengths[0] == 0
        assert small_graph.neighbor_positions(0).size == 0

    def test_short_sets_rule(self, small_graph):
        # |N_i| = min(m, i) at ordering position i (0-based)
        m = small_graph.m
        for i in (0, 1, 2, 5, m - 1, m, m + 1, 400):
            assert small_graph.lengths[i] == min(m, i)

    def test_min_m_with_large_m(self):
        coords = np.random.default_rng(5).uniform(0, 1, (10, 2))
        locs = kn.LocationSet(coords, (0, 0, 1))
        g = kn.build_graph(locs, 30)
        assert g.lengths[2] == 2  # i=3 one-based -> two predecessors

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(17)
        coords = rng.uniform(0, 1, (100, 2))
        locs = kn.LocationSet(coords, (0, 0, 1))
        order = maxmin_order(locs)
        g = build_conditioning_sets(locs, order, 10)
        ref = knn_predecessors_oracle(g.coords_ordered, order, 10)
        for i in range(100):
            assert np.array_equal(g.neighbor_positions(i), ref[i]), i

    def test_distances_nondecreasing(self, small_graph):
        d = small_graph.neighbor_dists
        for i in range(small_graph.n):
            k = small_graph.lengths[i]
            if k > 1:
                assert np.all(np.diff(d[i, :k]) >= 0)

    def test_members_precede(self, small_graph):
        for i in range(small_graph.n):
            nb = small_graph.neighbor_positions(i)
            assert np.all(nb < i)

    def test_kdtree_path_matches_brute(self):
        # n > 2000 triggers the indexed path; compare against the exhaustive scan
        rng = np.random.default_rng(23)
        coords = rng.uniform(0, 1, (2300, 2))
        locs = kn.LocationSet(coords, (0, 0, 1))
        order = maxmin_order(locs)
        g_tree = build_conditioning_sets(locs, order, 12)
        from krignet import _fastpath as _fp

        nbr = np.empty((2300, 12), dtype=np.int64)
        nlen = np.empty(2300, dtype=np.int64)
        _fp.knn_predecessors_brute(
            g_tree.coords_ordered, order.astype(np.float64), 12, nbr, nlen
        )
        assert np.array_equal(g_tree.neighbors, nbr)
        assert np.array_equal(g_tree.lengths, nlen)

    def test_kdtree_path_with_gridded_ties(self):
        # exact duplicate distances stress the tie handling
        xs, ys = np.meshgrid(np.arange(48), np.arange(48))
        coords = np.column_stack([xs.ravel(), ys.ravel()]).astype(float) / 47.0
        locs = kn.LocationSet(coords, (0, 0, 1))
        order = maxmin_order(locs)
        g = build_conditioning_sets(locs, order, 8)
        ref = knn_predecessors_oracle(g.coords_ordered, order, 8)
        for i in range(0, coords.shape[0], 97):
            assert np.array_equal(g.neighbor_positions(i), ref[i]), i

    def test_invalid_m(self, small_graph):
        locs = kn.LocationSet(np.random.default_rng(0).uniform(0, 1, (10, 2)), (0, 0, 1))
        with pytest.raises(ValueError):
            build_conditioning_sets(locs, np.arange(10), 0)

    def test_neighbors_original_mapping(self, small_graph):
        g = small_graph
        i = 50
        np.testing.assert_array_equal(
            g.neighbors_original(i), g.order[g.neighbor_positions(i)]
        )
