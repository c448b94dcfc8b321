"""Histogram-binned regression trees grown level by level.

Split search runs on pre-binned feature codes: a handful of bincounts
per level cover every active node at once, so ensembles stay fast
without per-node Python loops.  Features are grouped into power-of-two
bin-width buckets, which keeps each histogram sized by its features'
real candidate counts instead of the widest feature's.  Candidate
thresholds are midpoints of adjacent distinct values (exact search)
until a feature exceeds the bin budget, where quantile cuts take over.

The split objective is variance reduction.  For a parent with target sum
S and count n, splitting into (S_l, n_l) and (S_r, n_r) improves the fit
iff S_l^2/n_l + S_r^2/n_r > S^2/n; the builder maximizes the left-hand
side and ties break toward the lowest feature, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BINS = 128
_EPS = 1e-12


@dataclass
class BinnedFeatures:
    """Per-feature candidate thresholds plus the coded matrix.

    codes[i, f] = searchsorted(edges[f], X[i, f], side="left"), so code
    c <= e exactly when X[i, f] <= edges[f][e].
    """

    edges: list[np.ndarray]
    codes: np.ndarray  # (n_rows, n_features) uint16

    @property
    def n_features(self) -> int:
        return self.codes.shape[1]


def bin_features(X: np.ndarray, max_bins: int = MAX_BINS) -> BinnedFeatures:
    X = np.asarray(X, dtype=np.float64)
    n, f = X.shape
    edges: list[np.ndarray] = []
    codes = np.empty((n, f), dtype=np.uint16)
    for j in range(f):
        col = X[:, j]
        uq = np.unique(col)
        if len(uq) <= max_bins:
            cut = (uq[:-1] + uq[1:]) / 2.0
        else:
            qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
            cut = np.unique(np.quantile(col, qs))
        edges.append(cut)
        codes[:, j] = np.searchsorted(cut, col, side="left")
    return BinnedFeatures(edges=edges, codes=codes)


@dataclass
class Tree:
    """Flat array form: feature < 0 marks a leaf carrying value."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    value: np.ndarray  # float64

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return self.value[node]
            rows = np.flatnonzero(active)
            f = feat[rows]
            goes_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(goes_left, self.left[node[rows]], self.right[node[rows]])


def _bucket_features(edges: list[np.ndarray]) -> list[tuple[np.ndarray, int]]:
    """Group feature ids by power-of-two bin width, ascending ids within
    each group.  Width-1 features have no candidate split and are left
    out entirely."""
    groups: dict[int, list[int]] = {}
    for f, e in enumerate(edges):
        width = len(e) + 1
        if width < 2:
            continue
        groups.setdefault(1 << (width - 1).bit_length(), []).append(f)
    return [(np.array(groups[w], dtype=np.int64), w) for w in sorted(groups)]


def _best_in_bucket(
    crows: np.ndarray,
    yr: np.ndarray,
    node_of_row: np.ndarray,
    m: int,
    counts: np.ndarray,
    sums: np.ndarray,
    feats: np.ndarray,
    width: int,
    min_samples_leaf: int,
    allowed,
):
    """Best (gain, feature, edge) per node over one width bucket.

    Within the bucket the raveled argmax resolves gain ties to the
    lowest feature, then the lowest edge.  Returns None when the mask
    leaves no node any feature here.
    """
    if allowed is not None:
        return _best_in_bucket_masked(
            crows, yr, node_of_row, m, counts, sums, feats, width,
            min_samples_leaf, allowed,
        )

    k = len(feats)
    slot_codes = crows[:, feats]

    # one histogram pass over the (node, slot, bin) cells; ravel order
    # keeps per-bin accumulation in row order
    flat = (
        node_of_row[:, None] * (k * width)
        + np.arange(k, dtype=np.int64)[None, :] * width
        + slot_codes
    ).ravel()
    size = m * k * width
    hist_n = np.bincount(flat, minlength=size).reshape(m, k, width)
    hist_s = np.bincount(flat, weights=np.repeat(yr, k), minlength=size).reshape(m, k, width)

    # split at edge e sends codes <= e left; a feature's final bin (and
    # any padding past its real width) leaves the right side empty and
    # fails the min_samples_leaf check, so it is never chosen
    left_n = np.cumsum(hist_n, axis=2)
    left_s = np.cumsum(hist_s, axis=2)
    right_n = counts[:, None, None] - left_n
    valid = (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = left_s * left_s
        gain /= left_n
        right_s = sums[:, None, None] - left_s
        right_s *= right_s
        right_s /= right_n
        gain += right_s
    gain[~valid] = -np.inf

    flat_gain = gain.reshape(m, k * width)
    pos = np.argmax(flat_gain, axis=1)
    best = flat_gain[np.arange(m), pos]
    slot, edge = np.divmod(pos, width)
    return best, feats[slot], edge


def _best_in_bucket_masked(
    crows: np.ndarray,
    yr: np.ndarray,
    node_of_row: np.ndarray,
    m: int,
    counts: np.ndarray,
    sums: np.ndarray,
    feats: np.ndarray,
    width: int,
    min_samples_leaf: int,
    allowed: np.ndarray,
):
    """Masked variant working on exact (node, allowed feature) slots.

    No per-node padding: histogram size tracks the features each node
    may actually use, which is what makes per-split feature subsampling
    affordable.  Gains per cell are computed with the same operations as
    the dense path, so a mask of all-True is bit-identical to no mask.
    """
    # np.nonzero runs node-major, so each node's slots are contiguous
    # and in ascending feature order (the tie-break order)
    sub = allowed[:, feats]
    slot_node, local = np.nonzero(sub)
    n_slots = len(slot_node)
    if n_slots == 0:
        return None
    slot_feat = feats[local]
    per_node = np.bincount(slot_node, minlength=m)
    node_start = np.concatenate(([0], np.cumsum(per_node[:-1])))

    # expand each row into one histogram entry per slot of its node
    row_slots = per_node[node_of_row]
    total = int(row_slots.sum())
    if total == 0:
        return None
    row_rep = np.repeat(np.arange(len(node_of_row), dtype=np.int64), row_slots)
    run_start = np.concatenate(([0], np.cumsum(row_slots[:-1])))
    rank = np.arange(total, dtype=np.int64) - run_start[row_rep]
    slot_idx = node_start[node_of_row[row_rep]] + rank
    code = crows[row_rep, slot_feat[slot_idx]]

    flat = slot_idx * width + code
    size = n_slots * width
    hist_n = np.bincount(flat, minlength=size).reshape(n_slots, width)
    hist_s = np.bincount(flat, weights=yr[row_rep], minlength=size).reshape(n_slots, width)

    left_n = np.cumsum(hist_n, axis=1)
    left_s = np.cumsum(hist_s, axis=1)
    right_n = counts[slot_node][:, None] - left_n
    valid = (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = left_s * left_s
        gain /= left_n
        right_s = sums[slot_node][:, None] - left_s
        right_s *= right_s
        right_s /= right_n
        gain += right_s
    gain[~valid] = -np.inf

    edge = np.argmax(gain, axis=1)  # first max: lowest edge on ties
    g_slot = gain[np.arange(n_slots), edge]

    # fold slots back to one winner per node; slot rank order preserves
    # the lowest-feature tie-break
    kmax = int(per_node.max())
    rank_slot = np.arange(n_slots, dtype=np.int64) - node_start[slot_node]
    padded = np.full((m, kmax), -np.inf)
    padded[slot_node, rank_slot] = g_slot
    best_local = np.argmax(padded, axis=1)
    best = padded[np.arange(m), best_local]

    feat = np.full(m, crows.shape[1], dtype=np.int64)  # sentinel: no slot
    edge_out = np.zeros(m, dtype=np.int64)
    has = per_node > 0
    pick = np.minimum(node_start + best_local, n_slots - 1)
    feat[has] = slot_feat[pick[has]]
    edge_out[has] = edge[pick[has]]
    return best, feat, edge_out


def grow_tree(
    binned: BinnedFeatures,
    y: np.ndarray,
    row_indices: np.ndarray,
    max_depth: int,
    min_samples_leaf: int = 1,
    feature_mask_fn=None,
) -> Tree:
    """Level-wise greedy growth over the rows in ``row_indices``
    (repeats allowed, giving bootstrap weights).

    ``feature_mask_fn(depth, n_nodes)`` may return a boolean
    (n_nodes, n_features) array restricting which features each node at
    that depth may split on; None allows all.
    """
    codes = binned.codes
    n_features = binned.n_features
    rows = np.asarray(row_indices, dtype=np.int64)
    yr = np.asarray(y, dtype=np.float64)[rows]
    crows = codes[rows].astype(np.int64)
    buckets = _bucket_features(binned.edges)

    # ragged per-feature edges flattened for vectorized threshold lookup
    flat_edges = (
        np.concatenate(binned.edges) if binned.edges else np.zeros(0)
    )
    edge_offset = np.zeros(n_features, dtype=np.int64)
    if n_features:
        sizes = np.array([len(e) for e in binned.edges], dtype=np.int64)
        edge_offset[1:] = np.cumsum(sizes)[:-1]

    # every split adds two nodes and isolates at least one row per side
    capacity = 2 * max(len(rows), 1) + 1
    feature = np.full(capacity, -1, dtype=np.int32)
    threshold = np.zeros(capacity, dtype=np.float64)
    left = np.full(capacity, -1, dtype=np.int32)
    right = np.full(capacity, -1, dtype=np.int32)
    value = np.zeros(capacity, dtype=np.float64)
    value[0] = float(yr.mean()) if len(yr) else 0.0
    n_nodes = 1

    node_of_row = np.zeros(len(rows), dtype=np.int64)  # compact frontier slots
    frontier = np.array([0], dtype=np.int64)  # tree node id per slot

    for depth in range(max_depth):
        m = len(frontier)
        if m == 0 or len(node_of_row) == 0 or not buckets:
            break
        counts = np.bincount(node_of_row, minlength=m)
        sums = np.bincount(node_of_row, weights=yr, minlength=m)
        parent_score = np.divide(sums * sums, counts, out=np.zeros(m), where=counts > 0)

        allowed = feature_mask_fn(depth, m) if feature_mask_fn is not None else None

        # best candidate per node across buckets: gain descending, then
        # lowest feature, then lowest threshold
        best_gain = np.full(m, -np.inf)
        best_feature = np.full(m, n_features, dtype=np.int64)
        best_edge = np.zeros(m, dtype=np.int64)
        for feats, width in buckets:
            found = _best_in_bucket(
                crows, yr, node_of_row, m, counts, sums, feats, width,
                min_samples_leaf, allowed,
            )
            if found is None:
                continue
            g, f, e = found
            better = (g > best_gain) | ((g == best_gain) & (f < best_feature))
            best_gain = np.where(better, g, best_gain)
            best_feature = np.where(better, f, best_feature)
            best_edge = np.where(better, e, best_edge)

        improves = best_gain > parent_score + _EPS * (1.0 + np.abs(parent_score))
        split_slots = np.flatnonzero(improves)
        k = len(split_slots)
        if k == 0:
            break

        # materialize children and route rows
        node_ids = frontier[split_slots]
        feats = best_feature[split_slots]
        feature[node_ids] = feats.astype(np.int32)
        threshold[node_ids] = flat_edges[edge_offset[feats] + best_edge[split_slots]]
        child_base = n_nodes + 2 * np.arange(k, dtype=np.int64)
        left[node_ids] = child_base.astype(np.int32)
        right[node_ids] = (child_base + 1).astype(np.int32)
        slot_remap = np.full(m, -1, dtype=np.int64)
        slot_remap[split_slots] = 2 * np.arange(k, dtype=np.int64)
        frontier = (child_base[:, None] + np.array([0, 1])).ravel()
        n_nodes += 2 * k

        keep = np.flatnonzero(slot_remap[node_of_row] >= 0)
        if len(keep) == 0:
            break
        nodes_k = node_of_row[keep]
        goes_left = crows[keep, best_feature[nodes_k]] <= best_edge[nodes_k]
        node_of_row = slot_remap[nodes_k] + np.where(goes_left, 0, 1)
        yr = yr[keep]
        crows = crows[keep]

        m2 = len(frontier)
        c2 = np.bincount(node_of_row, minlength=m2).astype(np.float64)
        s2 = np.bincount(node_of_row, weights=yr, minlength=m2)
        filled = c2 > 0
        value[frontier[filled]] = s2[filled] / c2[filled]

        # children too small to split again, or whose targets carry no
        # spread at all, can leave the frontier now; their values are
        # already final.  The purity test is exact cancellation, so it
        # only fires when no split could ever clear the gain guard.
        s2y = np.bincount(node_of_row, weights=yr * yr, minlength=m2)
        splittable = (c2 >= 2 * min_samples_leaf) & (s2y * c2 != s2 * s2)
        if not splittable.all():
            live = np.flatnonzero(splittable[node_of_row])
            compact = np.cumsum(splittable) - 1
            node_of_row = compact[node_of_row[live]]
            yr = yr[live]
            crows = crows[live]
            frontier = frontier[splittable]

    return Tree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        value=value[:n_nodes].copy(),
    )


def grow_forest(
    binned: BinnedFeatures,
    y: np.ndarray,
    row_sets,
    max_depth: int,
    min_samples_leaf: int = 1,
    feature_mask_fn=None,
) -> list[Tree]:
    """Grow many trees level-synchronously over one binned matrix.

    ``row_sets`` holds one row-index array per tree.  Each level's
    histogram work runs once over the concatenated frontiers of every
    tree, so an ensemble costs a handful of numpy passes per depth
    instead of per tree.  ``feature_mask_fn(tree, depth, n_nodes)``
    follows the grow_tree contract for each member.  The result is
    bit-for-bit the trees grow_tree would produce one at a time.
    """
    n_trees = len(row_sets)
    if n_trees == 0:
        return []
    codes = binned.codes
    n_features = binned.n_features
    buckets = _bucket_features(binned.edges)

    flat_edges = (
        np.concatenate(binned.edges) if binned.edges else np.zeros(0)
    )
    edge_offset = np.zeros(n_features, dtype=np.int64)
    if n_features:
        sizes = np.array([len(e) for e in binned.edges], dtype=np.int64)
        edge_offset[1:] = np.cumsum(sizes)[:-1]

    lens = np.array([len(r) for r in row_sets], dtype=np.int64)
    rows = np.concatenate([np.asarray(r, dtype=np.int64) for r in row_sets])
    y64 = np.asarray(y, dtype=np.float64)
    yr = y64[rows]
    crows = codes[rows].astype(np.int64)

    capacity = 2 * max(int(lens.max(initial=0)), 1) + 1
    feature = np.full((n_trees, capacity), -1, dtype=np.int32)
    threshold = np.zeros((n_trees, capacity), dtype=np.float64)
    left = np.full((n_trees, capacity), -1, dtype=np.int32)
    right = np.full((n_trees, capacity), -1, dtype=np.int32)
    value = np.zeros((n_trees, capacity), dtype=np.float64)
    n_nodes = np.ones(n_trees, dtype=np.int64)
    starts = np.zeros(n_trees + 1, dtype=np.int64)
    np.cumsum(lens, out=starts[1:])
    for t in range(n_trees):
        seg = yr[starts[t]:starts[t + 1]]
        value[t, 0] = float(seg.mean()) if len(seg) else 0.0

    # global frontier: slot -> (owning tree, local node id), tree-major
    node_of_row = np.repeat(np.arange(n_trees, dtype=np.int64), lens)
    frontier = np.zeros(n_trees, dtype=np.int64)
    tree_of_slot = np.arange(n_trees, dtype=np.int64)

    for depth in range(max_depth):
        m = len(frontier)
        if m == 0 or len(node_of_row) == 0 or not buckets:
            break
        counts = np.bincount(node_of_row, minlength=m)
        sums = np.bincount(node_of_row, weights=yr, minlength=m)
        parent_score = np.divide(sums * sums, counts, out=np.zeros(m), where=counts > 0)

        allowed = None
        if feature_mask_fn is not None:
            m_per_tree = np.bincount(tree_of_slot, minlength=n_trees)
            blocks = []
            any_mask = False
            for t in range(n_trees):
                mt = int(m_per_tree[t])
                if mt == 0:
                    continue
                block = feature_mask_fn(t, depth, mt)
                if block is None:
                    block = np.ones((mt, n_features), dtype=bool)
                else:
                    any_mask = True
                blocks.append(block)
            if any_mask:
                allowed = np.concatenate(blocks, axis=0)

        best_gain = np.full(m, -np.inf)
        best_feature = np.full(m, n_features, dtype=np.int64)
        best_edge = np.zeros(m, dtype=np.int64)
        for feats, width in buckets:
            found = _best_in_bucket(
                crows, yr, node_of_row, m, counts, sums, feats, width,
                min_samples_leaf, allowed,
            )
            if found is None:
                continue
            g, f, e = found
            better = (g > best_gain) | ((g == best_gain) & (f < best_feature))
            best_gain = np.where(better, g, best_gain)
            best_feature = np.where(better, f, best_feature)
            best_edge = np.where(better, e, best_edge)

        improves = best_gain > parent_score + _EPS * (1.0 + np.abs(parent_score))
        split_slots = np.flatnonzero(improves)
        k = len(split_slots)
        if k == 0:
            break

        # materialize children per owning tree; ranks within a tree keep
        # local node ids identical to one-at-a-time growth
        tree_of_split = tree_of_slot[split_slots]
        node_ids = frontier[split_slots]
        feats = best_feature[split_slots]
        feature[tree_of_split, node_ids] = feats.astype(np.int32)
        threshold[tree_of_split, node_ids] = flat_edges[edge_offset[feats] + best_edge[split_slots]]
        per_tree = np.bincount(tree_of_split, minlength=n_trees)
        tree_start = np.zeros(n_trees, dtype=np.int64)
        np.cumsum(per_tree[:-1], out=tree_start[1:])
        rank = np.arange(k, dtype=np.int64) - tree_start[tree_of_split]
        child_base = n_nodes[tree_of_split] + 2 * rank
        left[tree_of_split, node_ids] = child_base.astype(np.int32)
        right[tree_of_split, node_ids] = (child_base + 1).astype(np.int32)
        slot_remap = np.full(m, -1, dtype=np.int64)
        slot_remap[split_slots] = 2 * np.arange(k, dtype=np.int64)
        frontier = (child_base[:, None] + np.array([0, 1])).ravel()
        tree_of_slot = np.repeat(tree_of_split, 2)
        n_nodes += 2 * per_tree

        keep = np.flatnonzero(slot_remap[node_of_row] >= 0)
        if len(keep) == 0:
            break
        nodes_k = node_of_row[keep]
        goes_left = crows[keep, best_feature[nodes_k]] <= best_edge[nodes_k]
        node_of_row = slot_remap[nodes_k] + np.where(goes_left, 0, 1)
        yr = yr[keep]
        crows = crows[keep]

        m2 = len(frontier)
        c2 = np.bincount(node_of_row, minlength=m2).astype(np.float64)
        s2 = np.bincount(node_of_row, weights=yr, minlength=m2)
        filled = c2 > 0
        value[tree_of_slot[filled], frontier[filled]] = s2[filled] / c2[filled]

        # same frontier-exit rule as grow_tree: too small to split, or
        # exactly zero target spread
        s2y = np.bincount(node_of_row, weights=yr * yr, minlength=m2)
        splittable = (c2 >= 2 * min_samples_leaf) & (s2y * c2 != s2 * s2)
        if not splittable.all():
            live = np.flatnonzero(splittable[node_of_row])
            compact = np.cumsum(splittable) - 1
            node_of_row = compact[node_of_row[live]]
            yr = yr[live]
            crows = crows[live]
            frontier = frontier[splittable]
            tree_of_slot = tree_of_slot[splittable]

    return [
        Tree(
            feature=feature[t, : n_nodes[t]].copy(),
            threshold=threshold[t, : n_nodes[t]].copy(),
            left=left[t, : n_nodes[t]].copy(),
            right=right[t, : n_nodes[t]].copy(),
            value=value[t, : n_nodes[t]].copy(),
        )
        for t in range(n_trees)
    ]
