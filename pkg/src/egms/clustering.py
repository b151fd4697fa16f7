"""K-means partitioning of the filtered set and worker-group packing.

Lloyd iterations start from k-means++ seeding and stop when the largest
centroid displacement falls below 1e-6 or after 100 iterations. Empty
clusters are repaired by reseeding the centroid onto the point currently
farthest from its assigned centroid (never stealing the last member of
another cluster). Inertia is asserted non-increasing across iterations.

Cluster groups for parallel workers are packed greedily by descending
member count onto the currently lightest group (longest-processing-time
rule), so group loads differ by at most one cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import EmbeddingStore
from .errors import InputError, InternalInvariantError

MAX_ITER = 100
SHIFT_TOL = 1e-6
_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Result of K-means over the kept rows.

    ``rows`` are the clustered store rows in input order; ``labels`` align
    with them. ``members`` holds, per cluster, the sorted store rows; no
    cluster is empty. ``inertia_history`` records the objective after each
    assignment step.
    """

    L: int
    rows: np.ndarray
    labels: np.ndarray
    centroids: np.ndarray
    members: tuple[np.ndarray, ...]
    inertia: float
    inertia_history: np.ndarray


@dataclass(frozen=True)
class ClusterGroups:
    """Disjoint cluster-id lists, one per worker."""

    groups: tuple[tuple[int, ...], ...]


def _assign_chunked(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row: (labels, squared distances)."""
    n = x.shape[0]
    labels = np.empty(n, dtype=np.int64)
    d2min = np.empty(n, dtype=np.float64)
    c_norms = np.einsum("ij,ij->i", centroids, centroids)
    for start in range(0, n, _CHUNK):
        chunk = x[start : start + _CHUNK]
        d2 = np.einsum("ij,ij->i", chunk, chunk)[:, None] - 2.0 * (chunk @ centroids.T) + c_norms
        lab = np.argmin(d2, axis=1)
        labels[start : start + _CHUNK] = lab
        d2min[start : start + _CHUNK] = np.take_along_axis(d2, lab[:, None], axis=1)[:, 0]
    np.maximum(d2min, 0.0, out=d2min)
    return labels, d2min


def _means_by_label(x: np.ndarray, labels: np.ndarray, L: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=L).astype(np.float64)
    sums = np.empty((L, x.shape[1]), dtype=np.float64)
    for j in range(x.shape[1]):
        sums[:, j] = np.bincount(labels, weights=x[:, j], minlength=L)
    return sums / counts[:, None]


def _kmeanspp(x: np.ndarray, L: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((L, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = x[first]
    diff = x - centroids[0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for j in range(1, L):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = x[idx]
        diff = x - centroids[j]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return centroids


def _assign_to_own(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = x - centroids[labels]
    d2 = np.einsum("ij,ij->i", diff, diff)
    return labels, d2


def _repair_empty(labels: np.ndarray, d2: np.ndarray, L: int) -> None:
    """Reseed each empty cluster with the globally worst-fit point.

    Mutates ``labels``/``d2`` in place; a stolen point's distance becomes 0
    because the reseeded centroid will land exactly on it.
    """
    counts = np.bincount(labels, minlength=L)
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return
    order = np.argsort(-d2, kind="stable")
    cursor = 0
    for cid in empties:
        while cursor < order.size and counts[labels[order[cursor]]] <= 1:
            cursor += 1
        if cursor >= order.size:
            raise InternalInvariantError("cannot repair empty cluster: no donor point")
        p = order[cursor]
        counts[labels[p]] -= 1
        labels[p] = cid
        counts[cid] = 1
        d2[p] = 0.0
        cursor += 1


def kmeans(store: EmbeddingStore, kept, L: int, seed: int) -> ClusterAssignment:
    """Lloyd K-means over ``store.data[kept]``, deterministic given seed."""
    rows = np.asarray(kept, dtype=np.int64).ravel()
    if rows.size == 0:
        raise InputError("kept index list is empty")
    if rows.min() < 0 or rows.max() >= store.count:
        raise InputError(f"kept index out of range [0, {store.count})")
    if len(np.unique(rows)) != rows.size:
        raise InputError("kept indices must be distinct")
    if L < 1 or L > rows.size:
        raise InputError(f"need 1 <= L <= |kept|, got L={L}, |kept|={rows.size}")
    x = store.data[rows]
    # stream tag 1 reserves this generator lineage for kmeans; the sampler
    # derives its per-cluster generators under other tags from the same seed
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), 1]))
    centroids = _kmeanspp(x, L, rng)

    history = []
    labels = np.empty(rows.size, dtype=np.int64)
    prev = np.inf
    for _ in range(MAX_ITER):
        labels, d2 = _assign_chunked(x, centroids)
        _repair_empty(labels, d2, L)
        inertia = float(d2.sum())
        if inertia > prev * (1.0 + 1e-12) + 1e-12:
            raise InternalInvariantError(f"inertia increased: {prev} -> {inertia}")
        prev = inertia
        history.append(inertia)
        new_centroids = _means_by_label(x, labels, L)
        shift = float(np.sqrt(np.einsum("ij,ij->i", new_centroids - centroids, new_centroids - centroids)).max())
        centroids = new_centroids
        if shift < SHIFT_TOL:
            break

    # final labels were computed against the previous centroids; the final
    # centroids are exactly the member means of those labels
    _, d2 = _assign_to_own(x, labels, centroids)
    inertia = float(d2.sum())
    members = tuple(np.sort(rows[labels == c]) for c in range(L))
    if any(m.size == 0 for m in members):
        raise InternalInvariantError("empty cluster at convergence")
    return ClusterAssignment(
        L=L,
        rows=rows,
        labels=labels,
        centroids=centroids,
        members=members,
        inertia=inertia,
        inertia_history=np.asarray(history),
    )


def centroids_to_store(assignment: ClusterAssignment) -> EmbeddingStore:
    """Centroids as an embedding store, e.g. for a binary-format dump."""
    return EmbeddingStore(assignment.centroids)


def partition_clusters(assignment: ClusterAssignment, G: int) -> ClusterGroups:
    """Pack clusters into G groups balanced by member count (LPT rule)."""
    if G < 1:
        raise InputError("worker count G must be >= 1")
    sizes = np.array([m.size for m in assignment.members], dtype=np.int64)
    order = np.lexsort((np.arange(sizes.size), -sizes))  # size desc, id asc
    groups: list[list[int]] = [[] for _ in range(G)]
    loads = np.zeros(G, dtype=np.int64)
    for cid in order:
        g = int(np.argmin(loads))
        groups[g].append(int(cid))
        loads[g] += sizes[cid]
    return ClusterGroups(groups=tuple(tuple(g) for g in groups))
