"""K-means partitioning and worker-group packing."""

from itertools import product

import numpy as np
import pytest

from egms import (
    EmbeddingStore,
    InputError,
    centroids_to_store,
    gen_synthetic,
    kmeans,
    partition_clusters,
)


class TestKmeans:
    def test_single_cluster_is_the_mean(self):
        store, _ = gen_synthetic(40, 3, 2, 0.5, seed=1)
        a = kmeans(store, np.arange(40), 1, seed=0)
        assert np.all(a.labels == 0)
        assert np.allclose(a.centroids[0], store.data.mean(axis=0), atol=1e-9)

    def test_two_blobs_recovered(self):
        store, _, truth = gen_synthetic(300, 5, 2, 0.5, seed=8, return_labels=True)
        a = kmeans(store, np.arange(300), 2, seed=4)
        same_truth = truth[:, None] == truth[None, :]
        same_found = a.labels[:, None] == a.labels[None, :]
        iu = np.triu_indices(300, k=1)
        assert (same_truth[iu] == same_found[iu]).mean() >= 0.95

    def test_one_cluster_per_point(self):
        store, _ = gen_synthetic(12, 4, 3, 0.7, seed=2)
        a = kmeans(store, np.arange(12), 12, seed=3)
        assert sorted(m.size for m in a.members) == [1] * 12
        assert a.inertia == pytest.approx(0.0, abs=1e-18)

    def test_duplicate_points_still_fill_all_clusters(self):
        store = EmbeddingStore(np.zeros((5, 2)))
        a = kmeans(store, np.arange(5), 5, seed=0)
        assert all(m.size == 1 for m in a.members)
        assert a.inertia == 0.0

    def test_deterministic_given_seed(self):
        store, _ = gen_synthetic(200, 6, 4, 0.8, seed=10)
        a = kmeans(store, np.arange(200), 8, seed=77)
        b = kmeans(store, np.arange(200), 8, seed=77)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.centroids, b.centroids)

    def test_inertia_history_non_increasing(self):
        store, _ = gen_synthetic(500, 4, 3, 1.5, seed=6)
        a = kmeans(store, np.arange(500), 6, seed=1)
        hist = a.inertia_history
        assert hist.size >= 1
        assert np.all(np.diff(hist) <= 1e-9 * np.maximum(1.0, hist[:-1]))

    def test_centroids_are_member_means(self):
        store, _ = gen_synthetic(400, 5, 4, 1.0, seed=12)
        kept = np.arange(0, 400, 2)
        a = kmeans(store, kept, 7, seed=5)
        for c in range(7):
            mean = store.data[a.members[c]].mean(axis=0)
            assert np.abs(a.centroids[c] - mean).max() <= 1e-9

    def test_members_partition_kept(self):
        store, _ = gen_synthetic(150, 3, 2, 0.9, seed=14)
        kept = np.arange(10, 140)
        a = kmeans(store, kept, 5, seed=9)
        merged = np.sort(np.concatenate(a.members))
        assert np.array_equal(merged, np.sort(kept))
        assert all(m.size > 0 for m in a.members)

    def test_kept_subset_respected(self):
        store, _ = gen_synthetic(60, 3, 2, 0.5, seed=15)
        kept = np.array([4, 9, 13, 21, 22, 30, 31, 40, 55])
        a = kmeans(store, kept, 3, seed=2)
        for m in a.members:
            assert np.isin(m, kept).all()

    def test_errors(self):
        store, _ = gen_synthetic(10, 2, 1, 0.5, seed=0)
        with pytest.raises(InputError):
            kmeans(store, np.arange(10), 11, seed=0)  # L > |kept|
        with pytest.raises(InputError):
            kmeans(store, np.array([], dtype=int), 1, seed=0)
        with pytest.raises(InputError):
            kmeans(store, np.array([0, 0, 1]), 2, seed=0)

    def test_centroid_dump_store(self):
        store, _ = gen_synthetic(50, 4, 2, 0.5, seed=3)
        a = kmeans(store, np.arange(50), 4, seed=1)
        dump = centroids_to_store(a)
        assert dump.count == 4 and dump.dim == 4


def brute_force_best_two_groups(sizes):
    """All ways to split clusters into 2 groups; minimal max load."""
    best = None
    n = len(sizes)
    for picks in product([0, 1], repeat=n):
        loads = [0, 0]
        for cid, g in enumerate(picks):
            loads[g] += sizes[cid]
        cost = max(loads)
        if best is None or cost < best:
            best = cost
    return best


class _FakeAssignment:
    def __init__(self, sizes):
        self.members = tuple(np.arange(s) for s in sizes)


class TestPartitionClusters:
    def test_lpt_example_is_optimal(self):
        sizes = [40, 30, 20, 10]
        groups = partition_clusters(_FakeAssignment(sizes), 2)
        loads = sorted(sum(sizes[c] for c in g) for g in groups.groups)
        assert loads == [50, 50]
        assert max(loads) == brute_force_best_two_groups(sizes)

    def test_single_group(self):
        groups = partition_clusters(_FakeAssignment([5, 3, 9]), 1)
        assert sorted(groups.groups[0]) == [0, 1, 2]

    def test_more_groups_than_clusters(self):
        groups = partition_clusters(_FakeAssignment([7, 2]), 5)
        nonempty = [g for g in groups.groups if g]
        assert sorted(len(g) for g in nonempty) == [1, 1]
        assert len(groups.groups) == 5

    def test_partition_property_randomized(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            sizes = rng.integers(1, 100, size=n).tolist()
            G = int(rng.integers(1, 10))
            groups = partition_clusters(_FakeAssignment(sizes), G)
            flat = [c for g in groups.groups for c in g]
            assert sorted(flat) == list(range(n))

    def test_balance_bound(self):
        rng = np.random.default_rng(35)
        for _ in range(50):
            sizes = rng.integers(1, 50, size=int(rng.integers(2, 25))).tolist()
            G = int(rng.integers(2, 6))
            groups = partition_clusters(_FakeAssignment(sizes), G)
            loads = [sum(sizes[c] for c in g) for g in groups.groups]
            # LPT guarantee: gap between heaviest and lightest group is at
            # most the largest cluster placed in the heaviest group
            if max(loads) > 0:
                assert max(loads) - min(loads) <= max(sizes)

    def test_invalid_worker_count(self):
        with pytest.raises(InputError):
            partition_clusters(_FakeAssignment([3]), 0)
