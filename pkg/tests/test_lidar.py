import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import as_partition, union_find_partition
from sparsefusion.geometry import Box3
from sparsefusion.lidar import (Votes, ccl_cluster, ccl_labels, make_lidar_queries, oracle_score,
                                oracle_vote, voxelize)
from sparsefusion.scene import ClassSpec, GroundTruth, SceneConfig, build_scene, generate_scene, gt_membership

BOX = ClassSpec(0, "box", (1.0, 1.0, 1.0), size_jitter=0.0, surface_point_rate=40)


def votes_at(centers):
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    return Votes(np.arange(len(centers)), centers)


def scene_with(centers, dims=(1.0, 1.0, 1.0), background=0, seed=0):
    gts = [GroundTruth(Box3(np.asarray(c, dtype=float), np.asarray(dims, dtype=float)), 0, i)
           for i, c in enumerate(centers)]
    return build_scene(SceneConfig(classes=(BOX,), background_points=background, seed=seed), gts, render=False)


class TestVoxelize:
    def test_same_cell(self):
        g = voxelize(np.array([[0.01, 0.01, 0.01], [0.06, 0.01, 0.01]]), (0.2, 0.2, 0.2))
        assert len(g) == 1

    def test_floor_boundary(self):
        g = voxelize(np.array([[0.19, 0, 0], [0.21, 0, 0]]), (0.2, 0.2, 0.2))
        assert len(g) == 2
        assert set(g.cells) == {(0, 0, 0), (1, 0, 0)}

    def test_partition(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-3, 3, (2000, 3))
        g = voxelize(pts, (0.2, 0.3, 0.5), origin=(0.1, -0.2, 0.0))
        cells = g.cells
        allidx = np.concatenate(list(cells.values()))
        assert sorted(allidx.tolist()) == list(range(2000))
        assert len(cells) <= 2000
        for key, idx in cells.items():
            expect = np.floor((pts[idx] - [0.1, -0.2, 0.0]) / [0.2, 0.3, 0.5]).astype(int)
            assert np.all(expect == key)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            voxelize(np.zeros((1, 3)), (0.2, 0.0, 0.2))


class TestOracleScore:
    def test_clean_and_complement(self):
        s = scene_with([[5, 0, 0.5], [-5, 3, 0.5]], background=500)
        truth = (gt_membership(s) >= 0).astype(float)
        np.testing.assert_array_equal(oracle_score(s, 0.0), truth)
        np.testing.assert_array_equal(oracle_score(s, 1.0), 1.0 - truth)

    def test_flip_rate(self):
        s = build_scene(SceneConfig(n_objects=0, background_points=10_000), [], render=False)
        flipped = oracle_score(s, 0.1, seed=3).mean()
        assert abs(flipped - 0.1) <= 0.01


class TestOracleVote:
    def test_exact_centers(self):
        s = scene_with([[5, 0, 0.5], [-5, 3, 0.5]], background=200)
        sc = oracle_score(s)
        v = oracle_vote(s, s.points, sc)
        owner = gt_membership(s)[v.point_index]
        centers = np.array([g.box.center for g in s.gt])
        assert np.all(owner >= 0)
        np.testing.assert_array_equal(v.centers, centers[owner])

    def test_threshold_above_one(self):
        s = scene_with([[5, 0, 0.5]])
        assert len(oracle_vote(s, s.points, oracle_score(s), fg_threshold=1.1)) == 0

    def test_false_positive_votes_for_itself(self):
        s = build_scene(SceneConfig(n_objects=0, background_points=50), [], render=False)
        v = oracle_vote(s, s.points, np.ones(50))
        np.testing.assert_array_equal(v.centers, s.points)

    def test_noisy_centroid(self):
        cls = (ClassSpec(0, "box", (1.0, 1.0, 1.0), size_jitter=0.0, surface_point_rate=40.0),)
        g = GroundTruth(Box3(np.array([10.0, 0, 0.5]), np.ones(3)), 0, 0)
        s = build_scene(SceneConfig(classes=cls, background_points=0), [g], render=False)
        assert len(s.points) == 200
        v = oracle_vote(s, s.points, oracle_score(s), sigma_m=0.1, seed=5)
        assert np.linalg.norm(v.centers.mean(axis=0) - g.box.center) < 0.03


class TestCCL:
    def test_within_radius(self):
        assert len(ccl_cluster(votes_at([[0, 0, 0], [0.4, 0, 0]]), 0.5)) == 1

    def test_beyond_radius(self):
        v = votes_at([[0, 0, 0], [0.6, 0, 0]])
        assert len(ccl_cluster(v, 0.5, min_cluster_points=2)) == 0
        assert len(ccl_cluster(v, 0.5, min_cluster_points=1)) == 2

    def test_exact_radius_connects(self):
        assert len(ccl_cluster(votes_at([[0, 0, 0], [0.5, 0, 0]]), 0.5)) == 1

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            ccl_cluster(votes_at([[0, 0, 0]]), 0.0)

    def test_matches_union_find(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            n = int(rng.integers(1, 301))
            c = rng.uniform(0, rng.uniform(1, 8), (n, 3))
            labels = ccl_labels(c, 0.5)
            got = as_partition([np.flatnonzero(labels == k) for k in np.unique(labels)])
            assert got == as_partition(union_find_partition(c.tolist(), 0.5))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3), min_size=1, max_size=60),
           st.floats(0.05, 2.0), st.randoms(use_true_random=False))
    def test_permutation_invariant(self, pts, radius, rnd):
        c = np.array(pts)
        perm = list(range(len(c)))
        rnd.shuffle(perm)
        v1 = ccl_cluster(votes_at(c), radius, 1)
        v2 = ccl_cluster(Votes(np.array(perm), c[perm]), radius, 1)
        assert as_partition(x.point_indices for x in v1) == as_partition(x.point_indices for x in v2)
        assert as_partition(x.point_indices for x in v1) == as_partition(union_find_partition(c.tolist(), radius))

    def test_one_cluster_per_object(self):
        s = scene_with([[5, 0, 0.5], [-5, 3, 0.5], [0, 8, 0.5]], background=300)
        sc = oracle_score(s)
        clusters = ccl_cluster(oracle_vote(s, s.points, sc), 0.5, 2, s.points)
        assert len(clusters) == 3
        for c in clusters:
            assert len(set(s.point_instance[c.point_indices])) == 1

    def test_close_objects_merge(self):
        s = scene_with([[5, 0, 0.5], [5, 0.3, 0.5]], dims=(0.2, 0.2, 1.0))
        clusters = ccl_cluster(oracle_vote(s, s.points, oracle_score(s)), 0.5, 2, s.points)
        assert len(clusters) == 1
        assert set(s.point_instance[clusters[0].point_indices]) == {0, 1}

    def test_small_clusters_dropped(self):
        v = votes_at([[0, 0, 0], [0.1, 0, 0], [5, 5, 5]])
        assert [len(c.point_indices) for c in ccl_cluster(v, 0.5, 2)] == [2]


class TestLidarQueries:
    def test_single_point(self):
        pts = np.array([[1.0, 2.0, 3.0]])
        q = make_lidar_queries(ccl_cluster(votes_at(pts), 0.5, 1, pts), pts)
        np.testing.assert_array_equal(q[0].position, pts[0])
        assert q[0].modality == "lidar" and q[0].source_box2 is None

    def test_symmetric_set(self):
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float) + [3, 4, 5]
        v = Votes(np.arange(4), np.zeros((4, 3)))
        q = make_lidar_queries(ccl_cluster(v, 0.5, 1, pts), pts)
        np.testing.assert_allclose(q[0].position, [3, 4, 5], atol=1e-12)

    def test_centroid_of_points_not_votes(self):
        s = generate_scene(SceneConfig(seed=2, n_objects=5, background_points=100))
        sc = oracle_score(s)
        qs = make_lidar_queries(ccl_cluster(oracle_vote(s, s.points, sc, sigma_m=0.05, seed=1),
                                            0.5, 2, s.points), s.points)
        assert qs
        for q in qs:
            expect = [sum(s.points[i][k] for i in q.point_indices) / len(q) for k in range(3)]
            np.testing.assert_allclose(q.position, expect, atol=1e-9)
