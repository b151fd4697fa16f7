"""Budget allocation, intra-cluster greedy sampling, and the full pipeline.

The pipeline: perplexity-tail filtering, K-means partitioning, cluster
budgets proportional to cluster size, then independent greedy sampling
inside each cluster. Each greedy step draws a fresh random candidate set,
scores every candidate by its entropy gain against the current selection,
and accepts the argmax (ties to the lowest row index). Negative gains are
accepted when they are the argmax; the rule is the maximum gain, not only
positive gains.

Per-cluster generators are seeded from (global seed, cluster id), so the
result is byte-identical regardless of how clusters are spread over
workers. Worker threads share the immutable embedding store and touch
only their own clusters' state; results are merged by cluster id.

Baseline strategies for comparison live in :func:`baseline_select`.
"""

from __future__ import annotations

import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .clustering import ClusterAssignment, kmeans, partition_clusters
from .datamodel import (
    ClusterRecord,
    EmbeddingStore,
    SampleMeta,
    SelectionConfig,
    SelectionManifest,
    check_aligned,
)
from .entropy import augment, build_similarity, entropy_gains, von_neumann_entropy, _kernel_block
from .errors import InputError, InternalInvariantError
from .filtering import filter_extremes, resolve_ppls

STRATEGIES = ("random", "mid_score", "ccs", "exam_average_allocation", "mmd_minimize")

# SeedSequence stream tags; tag 1 belongs to kmeans (see clustering.py).
# Keeps per-cluster and global-draw generators independent for one run seed.
_CLUSTER_STREAM = 2
_GLOBAL_STREAM = 3

ProgressFn = Callable[[int, int, float], None]


@dataclass(frozen=True)
class BudgetPlan:
    """Per-cluster budgets summing exactly to the requested total."""

    per_cluster: tuple[tuple[int, int], ...]
    total_requested: int
    total_allocated: int


@dataclass(frozen=True, eq=False)
class ClusterSampleResult:
    """Selection produced inside one cluster, in acceptance order."""

    cluster_id: int
    selected: np.ndarray
    entropy_trace: np.ndarray
    initial_pair: tuple[int, ...]


def allocate_budgets(cluster_sizes, B: int) -> BudgetPlan:
    """Cluster budgets proportional to cluster size, reconciled to sum B.

    Base allocation is ``max(1, floor(size/total * B))`` clamped to the
    cluster size. Largest-remainder reconciliation then hits the exact
    total: surplus is removed from the smallest fractional parts (keeping
    budgets >= 1 while possible), deficit is added to the largest
    fractional parts with remaining capacity. Ties break on the lower
    cluster id.
    """
    sizes = np.asarray(cluster_sizes, dtype=np.int64)
    if sizes.size == 0:
        raise InputError("cluster size list is empty")
    if (sizes < 1).any():
        raise InputError("cluster sizes must be >= 1")
    if B < 1:
        raise InputError("budget must be >= 1")
    total = int(sizes.sum())
    if B > total:
        raise InputError(f"budget {B} exceeds population {total}")

    exact = sizes / total * B
    frac = exact - np.floor(exact)
    alloc = np.maximum(1, np.floor(exact).astype(np.int64))
    np.minimum(alloc, sizes, out=alloc)

    if alloc.sum() > B:
        # one unit per cluster per round, smallest fractional parts first;
        # budgets stay >= 1 until no cluster has more than one, then forced
        # zeros apply in the same order
        order = np.lexsort((np.arange(sizes.size), frac))
        surplus = int(alloc.sum() - B)
        while surplus > 0:
            eligible = order[alloc[order] > 1][:surplus]
            if eligible.size == 0:
                eligible = order[alloc[order] == 1][:surplus]
            if eligible.size == 0:
                raise InternalInvariantError("budget reconciliation cannot reach the total")
            alloc[eligible] -= 1
            surplus -= eligible.size
    elif alloc.sum() < B:
        # one unit per cluster per round, largest fractional parts first,
        # capped by remaining capacity
        order = np.lexsort((np.arange(sizes.size), -frac))
        deficit = int(B - alloc.sum())
        while deficit > 0:
            eligible = order[alloc[order] < sizes[order]][:deficit]
            if eligible.size == 0:
                raise InternalInvariantError("budget reconciliation cannot reach the total")
            alloc[eligible] += 1
            deficit -= eligible.size

    if alloc.sum() != B or (alloc > sizes).any() or (alloc < 0).any():
        raise InternalInvariantError("budget plan violates its invariants")
    return BudgetPlan(
        per_cluster=tuple((int(c), int(b)) for c, b in enumerate(alloc)),
        total_requested=int(B),
        total_allocated=int(alloc.sum()),
    )


def greedy_sample_cluster(
    store: EmbeddingStore,
    members,
    budget: int,
    m: int,
    sigma: float,
    rng: np.random.Generator,
    cluster_id: int = 0,
    progress: ProgressFn | None = None,
) -> ClusterSampleResult:
    """Greedy entropy-gain selection of ``budget`` rows inside one cluster.

    Seeds with two random distinct members (one when budget is 1), then
    fills each remaining slot with the best of up to ``m`` randomly drawn
    unselected candidates. A budget covering the whole cluster returns all
    members in index order.
    """
    members = np.asarray(members, dtype=np.int64).ravel()
    if members.size == 0:
        raise InputError("cluster members list is empty")
    if len(np.unique(members)) != members.size:
        raise InputError("cluster members must be distinct")
    if budget < 1:
        raise InputError("cluster budget must be >= 1")
    members = np.sort(members)

    if budget >= members.size:
        trace = np.empty(members.size, dtype=np.float64)
        state = build_similarity(store, [int(members[0])], sigma)
        trace[0] = von_neumann_entropy(state)
        for i, row in enumerate(members[1:], start=1):
            state = augment(state, store, int(row), sigma)
            trace[i] = von_neumann_entropy(state)
        if progress is not None:
            for i, e in enumerate(trace):
                progress(cluster_id, i, float(e))
        return ClusterSampleResult(
            cluster_id=cluster_id,
            selected=members.copy(),
            entropy_trace=trace,
            initial_pair=tuple(int(r) for r in members[:2]),
        )

    n_seed = 1 if budget == 1 else 2
    seeds = rng.choice(members, size=n_seed, replace=False)
    selected = [int(s) for s in seeds]
    trace = [0.0]
    state = build_similarity(store, [selected[0]], sigma)
    if n_seed == 2:
        state = augment(state, store, selected[1], sigma)
        trace.append(von_neumann_entropy(state))
    if progress is not None:
        for i, e in enumerate(trace):
            progress(cluster_id, i, float(e))

    mask = np.isin(members, np.asarray(selected, dtype=np.int64))
    base_entropy = trace[-1]
    while len(selected) < budget:
        unselected = members[~mask]
        if unselected.size > m:
            candidates = rng.choice(unselected, size=m, replace=False)
        else:
            candidates = unselected
        gains, entropies = entropy_gains(state, store, candidates, sigma, base_entropy=base_entropy)
        best_gain = gains.max()
        chosen_pos = np.flatnonzero(gains == best_gain)
        chosen = int(candidates[chosen_pos].min())
        chosen_entropy = float(entropies[chosen_pos[np.argmin(candidates[chosen_pos])]])
        state = augment(state, store, chosen, sigma)
        selected.append(chosen)
        trace.append(chosen_entropy)
        base_entropy = chosen_entropy
        mask[np.searchsorted(members, chosen)] = True
        if progress is not None:
            progress(cluster_id, len(selected) - 1, chosen_entropy)

    return ClusterSampleResult(
        cluster_id=cluster_id,
        selected=np.asarray(selected, dtype=np.int64),
        entropy_trace=np.asarray(trace, dtype=np.float64),
        initial_pair=tuple(selected[:n_seed]),
    )


def _cluster_rng(seed: int, cluster_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), _CLUSTER_STREAM, int(cluster_id)]))


def stderr_progress(cluster_id: int, step: int, entropy: float) -> None:
    """Machine-parsable progress line, one per accepted sample."""
    sys.stderr.write(f"progress cluster={cluster_id} step={step} entropy={entropy!r}\n")


_progress_lock = threading.Lock()


def _locked(progress: ProgressFn | None) -> ProgressFn | None:
    if progress is None:
        return None

    def fn(cid: int, step: int, entropy: float) -> None:
        with _progress_lock:
            progress(cid, step, entropy)

    return fn


def _prepare(store: EmbeddingStore, metas: list[SampleMeta], config: SelectionConfig) -> EmbeddingStore:
    check_aligned(store, metas)
    if config.normalize:
        store = store.l2_normalized()
    return store


def _run_clustered(
    config: SelectionConfig,
    plan: BudgetPlan,
    assignment: ClusterAssignment,
    sample_one: Callable[[int, np.ndarray, int], ClusterSampleResult],
) -> dict[int, ClusterSampleResult]:
    """Run per-cluster sampling over worker groups; merge is by cluster id."""
    groups = partition_clusters(assignment, config.workers)
    budgets = dict(plan.per_cluster)
    results: dict[int, ClusterSampleResult] = {}
    lock = threading.Lock()

    def run_group(cluster_ids: tuple[int, ...]) -> None:
        for cid in cluster_ids:
            if budgets[cid] < 1:
                continue
            res = sample_one(cid, assignment.members[cid], budgets[cid])
            with lock:
                results[cid] = res

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(run_group, g) for g in groups.groups]
        for fut in futures:
            fut.result()
    return results


def _manifest_from_cluster_results(
    config: SelectionConfig,
    strategy: str,
    metas: list[SampleMeta],
    plan: BudgetPlan,
    results: dict[int, ClusterSampleResult],
    filtered_out_rows: np.ndarray,
    bins: int | None = None,
) -> SelectionManifest:
    ids = [m.id for m in metas]
    selected, clusters_col, steps_col, trace = [], [], [], []
    per_cluster = []
    for cid, budget in plan.per_cluster:
        if cid not in results:
            per_cluster.append(ClusterRecord(cluster_id=cid, budget=budget, selected_ids=(), final_entropy=None))
            continue
        res = results[cid]
        rec_ids = tuple(ids[r] for r in res.selected)
        per_cluster.append(
            ClusterRecord(
                cluster_id=cid,
                budget=budget,
                selected_ids=rec_ids,
                final_entropy=float(res.entropy_trace[-1]),
            )
        )
        for step, row in enumerate(res.selected):
            selected.append(ids[row])
            clusters_col.append(cid)
            steps_col.append(step)
            trace.append(float(res.entropy_trace[step]))
    return SelectionManifest(
        config=config,
        strategy=strategy,
        selected=tuple(selected),
        selected_clusters=tuple(clusters_col),
        selected_steps=tuple(steps_col),
        per_cluster=tuple(per_cluster),
        filtered_out=tuple(ids[r] for r in filtered_out_rows),
        pipeline_entropy_trace=tuple(trace),
        bins=bins,
    )


def exam_select(
    store: EmbeddingStore,
    metas: list[SampleMeta],
    config: SelectionConfig,
    progress: ProgressFn | None = None,
) -> SelectionManifest:
    """Full pipeline: filter, cluster, allocate, greedy-sample, merge."""
    store = _prepare(store, metas, config)
    ppls = resolve_ppls(metas)
    fs = filter_extremes(ppls, config.tail_low, config.tail_high)
    if config.budget > fs.kept.size:
        raise InputError(f"budget {config.budget} exceeds post-filter size {fs.kept.size}")
    assignment = kmeans(store, fs.kept, config.clusters, config.seed)
    plan = allocate_budgets([m.size for m in assignment.members], config.budget)
    progress = _locked(progress)

    def sample_one(cid: int, members: np.ndarray, budget: int) -> ClusterSampleResult:
        return greedy_sample_cluster(
            store,
            members,
            budget,
            config.candidate_size,
            config.sigma,
            _cluster_rng(config.seed, cid),
            cluster_id=cid,
            progress=progress,
        )

    results = _run_clustered(config, plan, assignment, sample_one)
    filtered_rows = np.concatenate([fs.removed_low, fs.removed_high])
    return _manifest_from_cluster_results(config, "exam", metas, plan, results, filtered_rows)


# ---------------------------------------------------------------------------
# Baseline strategies
# ---------------------------------------------------------------------------


def _score_vector(metas: list[SampleMeta]) -> np.ndarray:
    """Difficulty scores for score-based baselines: score field, else ppl."""
    if all(m.score is not None for m in metas):
        return np.array([m.score for m in metas], dtype=np.float64)
    try:
        return resolve_ppls(metas)
    except InputError as exc:
        raise InputError(f"strategy needs a score or ppl for every sample: {exc}") from exc


def _global_manifest(
    config: SelectionConfig,
    strategy: str,
    metas: list[SampleMeta],
    selected_rows: np.ndarray,
    bins: int | None = None,
) -> SelectionManifest:
    ids = [m.id for m in metas]
    selected = tuple(ids[r] for r in selected_rows)
    return SelectionManifest(
        config=config,
        strategy=strategy,
        selected=selected,
        selected_clusters=(-1,) * len(selected),
        selected_steps=tuple(range(len(selected))),
        per_cluster=(
            ClusterRecord(cluster_id=-1, budget=config.budget, selected_ids=selected, final_entropy=None),
        ),
        filtered_out=(),
        pipeline_entropy_trace=None,
        bins=bins,
    )


def _select_random(store: EmbeddingStore, metas, config: SelectionConfig) -> SelectionManifest:
    n = store.count
    if config.budget > n:
        raise InputError(f"budget {config.budget} exceeds dataset size {n}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[config.seed, _GLOBAL_STREAM]))
    rows = rng.choice(n, size=config.budget, replace=False)
    return _global_manifest(config, "random", metas, rows)


def _select_mid_score(store: EmbeddingStore, metas, config: SelectionConfig) -> SelectionManifest:
    n = store.count
    if config.budget > n:
        raise InputError(f"budget {config.budget} exceeds dataset size {n}")
    scores = _score_vector(metas)
    ranks_of_rows = np.lexsort((np.arange(n), scores))  # row index per ascending rank
    median_rank = (n - 1) / 2.0
    rank_order = np.lexsort((np.arange(n), np.abs(np.arange(n) - median_rank)))
    rows = ranks_of_rows[rank_order[: config.budget]]
    return _global_manifest(config, "mid_score", metas, rows)


def _select_ccs(store: EmbeddingStore, metas, config: SelectionConfig, bins: int) -> SelectionManifest:
    n = store.count
    if config.budget > n:
        raise InputError(f"budget {config.budget} exceeds dataset size {n}")
    if bins < 1:
        raise InputError("ccs bin count must be >= 1")
    scores = _score_vector(metas)
    lo, hi = float(scores.min()), float(scores.max())
    if hi > lo:
        bin_of = np.minimum((((scores - lo) / (hi - lo)) * bins).astype(np.int64), bins - 1)
    else:
        bin_of = np.zeros(n, dtype=np.int64)
    members = [np.flatnonzero(bin_of == b) for b in range(bins)]
    sizes = np.array([m.size for m in members], dtype=np.int64)
    take = np.minimum(config.budget // bins, sizes)
    # deficit from empty or small bins goes round-robin to bins with capacity
    while take.sum() < config.budget:
        advanced = False
        for b in range(bins):
            if take.sum() >= config.budget:
                break
            if take[b] < sizes[b]:
                take[b] += 1
                advanced = True
        if not advanced:
            raise InternalInvariantError("ccs cannot fill the budget")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[config.seed, _GLOBAL_STREAM]))
    rows = []
    for b in range(bins):
        if take[b] > 0:
            rows.extend(int(r) for r in rng.choice(members[b], size=int(take[b]), replace=False))
    return _global_manifest(config, "ccs", metas, np.asarray(rows, dtype=np.int64), bins=bins)


def _average_budgets(cluster_sizes, B: int) -> BudgetPlan:
    """Equal split B/L with the remainder going to the largest clusters."""
    sizes = np.asarray(cluster_sizes, dtype=np.int64)
    L = sizes.size
    base = B // L
    alloc = np.minimum(np.full(L, base, dtype=np.int64), sizes)
    order = np.lexsort((np.arange(L), -sizes))  # size desc, id asc
    remainder = B % L
    for idx in order[:remainder]:
        if alloc[idx] < sizes[idx]:
            alloc[idx] += 1
    while alloc.sum() < B:
        moved = False
        for idx in order:
            if alloc[idx] < sizes[idx]:
                alloc[idx] += 1
                moved = True
                break
        if not moved:
            raise InputError(f"budget {B} exceeds population {int(sizes.sum())}")
    return BudgetPlan(
        per_cluster=tuple((int(c), int(b)) for c, b in enumerate(alloc)),
        total_requested=int(B),
        total_allocated=int(alloc.sum()),
    )


def _select_exam_average(
    store: EmbeddingStore, metas, config: SelectionConfig, progress: ProgressFn | None
) -> SelectionManifest:
    store = _prepare(store, metas, config)
    ppls = resolve_ppls(metas)
    fs = filter_extremes(ppls, config.tail_low, config.tail_high)
    if config.budget > fs.kept.size:
        raise InputError(f"budget {config.budget} exceeds post-filter size {fs.kept.size}")
    assignment = kmeans(store, fs.kept, config.clusters, config.seed)
    plan = _average_budgets([m.size for m in assignment.members], config.budget)
    progress = _locked(progress)

    def sample_one(cid: int, members: np.ndarray, budget: int) -> ClusterSampleResult:
        return greedy_sample_cluster(
            store, members, budget, config.candidate_size, config.sigma,
            _cluster_rng(config.seed, cid), cluster_id=cid, progress=progress,
        )

    results = _run_clustered(config, plan, assignment, sample_one)
    filtered_rows = np.concatenate([fs.removed_low, fs.removed_high])
    return _manifest_from_cluster_results(
        config, "exam_average_allocation", metas, plan, results, filtered_rows
    )


def mmd_sample_cluster(
    store: EmbeddingStore,
    members,
    budget: int,
    sigma: float,
    cluster_id: int = 0,
) -> ClusterSampleResult:
    """Greedy subset minimizing the squared MMD between subset and cluster.

    The objective per candidate drops the subset-independent cluster term:
    ``mean(k within S) - 2 * mean(k between S and the cluster)``. The
    entropy trace is recorded for provenance just like the other
    cluster samplers.
    """
    members = np.sort(np.asarray(members, dtype=np.int64).ravel())
    if members.size == 0:
        raise InputError("cluster members list is empty")
    if budget < 1:
        raise InputError("cluster budget must be >= 1")
    if budget >= members.size:
        order = members
    else:
        pts = store.data[members]
        mu = np.zeros(members.size, dtype=np.float64)
        chunk = max(1, 2_000_000 // max(1, members.size))
        for start in range(0, members.size, chunk):
            mu[start : start + chunk] = _kernel_block(pts[start : start + chunk], pts, sigma).mean(axis=1)
        s = np.zeros(members.size, dtype=np.float64)  # kernel sum to selected
        chosen_mask = np.zeros(members.size, dtype=bool)
        k_ss = 0.0  # kernel sum over selected x selected
        mu_s = 0.0  # sum of mu over selected
        order_list = []
        for t in range(budget):
            obj = (k_ss + 2.0 * s + 1.0) / (t + 1) ** 2 - 2.0 * (mu_s + mu) / (t + 1)
            obj[chosen_mask] = np.inf
            best = obj.min()
            pick = int(np.flatnonzero(obj == best).min())
            chosen_mask[pick] = True
            k_vec = _kernel_block(pts[pick][None, :], pts, sigma)[0]
            k_ss += 2.0 * s[pick] + 1.0
            mu_s += mu[pick]
            s += k_vec
            order_list.append(pick)
        order = members[np.asarray(order_list, dtype=np.int64)]

    trace = np.empty(order.size, dtype=np.float64)
    state = build_similarity(store, [int(order[0])], sigma)
    trace[0] = von_neumann_entropy(state)
    for i, row in enumerate(order[1:], start=1):
        state = augment(state, store, int(row), sigma)
        trace[i] = von_neumann_entropy(state)
    return ClusterSampleResult(
        cluster_id=cluster_id,
        selected=np.asarray(order, dtype=np.int64),
        entropy_trace=trace,
        initial_pair=tuple(int(r) for r in order[:2]),
    )


def _select_mmd(store: EmbeddingStore, metas, config: SelectionConfig) -> SelectionManifest:
    store = _prepare(store, metas, config)
    n = store.count
    if config.budget > n:
        raise InputError(f"budget {config.budget} exceeds dataset size {n}")
    rows = np.arange(n, dtype=np.int64)
    assignment = kmeans(store, rows, config.clusters, config.seed)
    plan = allocate_budgets([m.size for m in assignment.members], config.budget)

    def sample_one(cid: int, members: np.ndarray, budget: int) -> ClusterSampleResult:
        return mmd_sample_cluster(store, members, budget, config.sigma, cluster_id=cid)

    results = _run_clustered(config, plan, assignment, sample_one)
    return _manifest_from_cluster_results(
        config, "mmd_minimize", metas, plan, results, np.empty(0, dtype=np.int64)
    )


def baseline_select(
    store: EmbeddingStore,
    metas: list[SampleMeta],
    strategy: str,
    config: SelectionConfig,
    bins: int = 50,
    progress: ProgressFn | None = None,
) -> SelectionManifest:
    """Comparison strategies sharing the manifest contract of exam_select.

    ``random`` draws uniformly without replacement; ``mid_score`` keeps
    the samples rank-closest to the median score; ``ccs`` spreads a
    uniform budget over equal-width score bins; ``exam_average_allocation``
    is the full pipeline with an equal per-cluster split; ``mmd_minimize``
    replaces the entropy objective with squared-MMD minimization inside
    each cluster. Score-free strategies run without perplexity filtering.
    """
    if strategy not in STRATEGIES:
        raise InputError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    check_aligned(store, metas)
    if strategy == "random":
        return _select_random(store, metas, config)
    if strategy == "mid_score":
        return _select_mid_score(store, metas, config)
    if strategy == "ccs":
        return _select_ccs(store, metas, config, bins)
    if strategy == "exam_average_allocation":
        return _select_exam_average(store, metas, config, progress)
    return _select_mmd(store, metas, config)
