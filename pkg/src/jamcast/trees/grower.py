"""Histogram-based best-first tree growth and its split mathematics.

The grower works entirely on quantized bin codes. Per-node statistics are
per-(feature, bin) sums of gradient, hessian and row count; split finding
scans each feature's bins left-to-right, evaluates the regularized gain at
every bin boundary with the missing bin routed both ways, and keeps the
best candidate under deterministic tie-breaking (lowest feature, lowest
bin, missing-left first). Growth is best-first: the frontier node with the
highest gain is expanded next, which is what makes a global leaf budget
(max_leaves) meaningful alongside max_depth. The sibling of a built child
histogram is derived by subtraction from the parent.

All accumulation orders and reduction shapes are fixed (see
jamcast.parallel), so grown trees never depend on scheduling.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from jamcast.errors import DegenerateNodeError, ValidationError

# ---------------------------------------------------------------------------
# logistic loss


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return out if out.ndim else float(out)


def logistic_grad_hess(
    margin: np.ndarray | float, label: np.ndarray | bool
) -> tuple[np.ndarray | float, np.ndarray | float]:
    """Gradient and hessian of the log-loss w.r.t. the prediction margin.

    p = sigmoid(margin); g = p - label; h = p * (1 - p).
    """
    m = np.asarray(margin, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValidationError("margin must be finite")
    p = sigmoid(m)
    y = np.asarray(label, dtype=np.float64)
    g = p - y
    h = p * (1.0 - p)
    if np.ndim(margin) == 0 and np.ndim(label) == 0:
        return float(g), float(h)
    return g, h


def leaf_weight(g_sum: float, h_sum: float, lam: float) -> float:
    """Second-order optimal leaf value: -G / (H + lambda)."""
    denom = h_sum + lam
    if denom <= 0:
        raise DegenerateNodeError(f"H + lambda must be positive, got {denom}")
    return -g_sum / denom + 0.0  # normalize -0.0


def split_gain(
    left: tuple[float, float],
    right: tuple[float, float],
    lam: float,
    gamma: float,
) -> float:
    """Regularized gain of a split given (G, H) sums of both sides.

    0.5 * [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - (G_L+G_R)^2/(H_L+H_R+lam)] - gamma
    """
    gl, hl = left
    gr, hr = right
    if hl + lam <= 0 or hr + lam <= 0 or hl + hr + lam <= 0:
        raise DegenerateNodeError("each side needs H + lambda > 0")
    parent = (gl + gr) ** 2 / (hl + hr + lam)
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - gamma


# ---------------------------------------------------------------------------
# histograms


@dataclass
class GradHistogram:
    """Per-(feature, bin) sums: [..., 0] = gradient, [..., 1] = hessian, [..., 2] = count."""

    sums: np.ndarray  # (n_features, n_bins, 3) float64
    n_real_bins: np.ndarray  # per-feature real-bin counts (missing slot follows)

    def total(self) -> tuple[float, float, float]:
        """Node totals (G, H, count); every feature column carries the same totals."""
        t = self.sums[0].sum(axis=0)
        return float(t[0]), float(t[1]), float(t[2])

    def subtract(self, other: "GradHistogram") -> "GradHistogram":
        return GradHistogram(sums=self.sums - other.sums, n_real_bins=self.n_real_bins)


def build_histograms(
    binned,
    rows: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    row_offset: int = 0,
) -> GradHistogram:
    """Accumulate g/h/count histograms over exactly `rows` of a binned matrix.

    `rows` must be ascending; accumulation is in that fixed order so sums are
    bit-deterministic. `g` and `h` are per-row arrays indexed by
    row - row_offset: full-matrix callers pass offset 0, partition-local
    state passes its range start.
    """
    rows = np.asarray(rows, dtype=np.int64)
    n_features = binned.codes.shape[0]
    n_bins = binned.hist_bins
    sums = np.zeros((n_features, n_bins, 3), dtype=np.float64)
    if rows.size:
        loc = rows - row_offset if row_offset else rows
        gr = g[loc]
        hr = h[loc]
        for j in range(n_features):
            # one up-front intp conversion instead of one inside each bincount
            cj = binned.codes[j][rows].astype(np.intp)
            sums[j, :, 0] = np.bincount(cj, weights=gr, minlength=n_bins)
            sums[j, :, 1] = np.bincount(cj, weights=hr, minlength=n_bins)
            sums[j, :, 2] = np.bincount(cj, minlength=n_bins)
    return GradHistogram(sums=sums, n_real_bins=binned.n_real_bins)


# ---------------------------------------------------------------------------
# split finding


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    bin_threshold: int
    gain: float
    left_sums: tuple[float, float, float]  # (G, H, count)
    right_sums: tuple[float, float, float]
    missing_goes_left: bool


def _boost_gain_scan(
    gl: np.ndarray, hl: np.ndarray, gp: float, hp: float, lam: float, gamma: float
) -> np.ndarray:
    gr = gp - gl
    hr = hp - hl
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (
            gl * gl / (hl + lam) + gr * gr / (hr + lam) - gp * gp / (hp + lam)
        ) - gamma
    bad = (hl + lam <= 0) | (hr + lam <= 0)
    gains[bad] = -np.inf
    return gains


def _gini_gain_scan(
    gl: np.ndarray, hl: np.ndarray, gp: float, hp: float, lam: float, gamma: float
) -> np.ndarray:
    # weighted impurity decrease; G = positive weight, H = total weight
    gr = gp - gl
    hr = hp - hl
    with np.errstate(divide="ignore", invalid="ignore"):
        dec = 2.0 * (
            gp * (hp - gp) / hp - gl * (hl - gl) / hl - gr * (hr - gr) / hr
        ) - gamma
    bad = (hl <= 0) | (hr <= 0)
    dec[bad] = -np.inf
    return dec


_GAIN_SCANS = {"boost": _boost_gain_scan, "gini": _gini_gain_scan}


def find_best_split(
    hist: GradHistogram,
    parent: tuple[float, float, float],
    config,
    *,
    objective: str = "boost",
    allowed_features: np.ndarray | None = None,
) -> SplitCandidate | None:
    """Best positive-gain split over all bin boundaries and missing placements.

    Scans each feature's real bins left-to-right; at every boundary the
    missing bin is tried on both sides. A valid candidate must route at
    least one observed (non-missing) row to each side: the missing bin can
    tip a side but never constitute it, which keeps the candidate set a
    node-level property rather than an artifact of the global binning.
    Ties break to the lowest feature index, then lowest bin, then
    missing-left (which also makes missing-left the default for nodes that
    saw no missing values). Returns None when no candidate has positive
    gain and min_child_weight on both sides.
    """
    gp, hp, cp = parent
    scan = _GAIN_SCANS[objective]
    mcw = config.min_child_weight
    feats = (
        range(hist.sums.shape[0])
        if allowed_features is None
        else [int(f) for f in allowed_features]
    )
    best: SplitCandidate | None = None
    for f in feats:
        nb = int(hist.n_real_bins[f])
        if nb < 2:
            continue
        col = hist.sums[f]
        cum = np.cumsum(col[:nb], axis=0)  # over real bins
        gl0 = cum[: nb - 1, 0]
        hl0 = cum[: nb - 1, 1]
        cl0 = cum[: nb - 1, 2]
        gm, hm, cm = col[nb]  # missing slot
        # placement axis: 0 = missing goes left, 1 = missing goes right
        gl = np.stack([gl0 + gm, gl0], axis=1)
        hl = np.stack([hl0 + hm, hl0], axis=1)
        cl = np.stack([cl0 + cm, cl0], axis=1)
        gains = scan(gl, hl, gp, hp, config.lam, config.gamma)
        gains[(hl < mcw) | (hp - hl < mcw)] = -np.inf
        present_total = cum[nb - 1, 2]
        gains[(cl0 == 0) | (cl0 == present_total), :] = -np.inf
        flat = int(np.argmax(gains))
        b, pl = divmod(flat, 2)
        gain = float(gains[b, pl])
        if not gain > 0 or not math.isfinite(gain):
            continue
        if best is None or gain > best.gain:
            lg, lh, lc = float(gl[b, pl]), float(hl[b, pl]), float(cl[b, pl])
            best = SplitCandidate(
                feature=f,
                bin_threshold=int(b),
                gain=gain,
                left_sums=(lg, lh, lc),
                right_sums=(gp - lg, hp - lh, cp - lc),
                missing_goes_left=(pl == 0),
            )
    return best


# ---------------------------------------------------------------------------
# trees


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    bin_threshold: int = -1
    threshold: float = math.nan  # raw-value threshold, edges[feature][bin_threshold]
    missing_goes_left: bool = True
    left: int = -1
    right: int = -1
    value: float = 0.0
    gain: float = math.nan  # split gain (internal nodes)

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class DecisionTree:
    """Axis-aligned binary tree; leaves carry margin contributions or class fractions."""

    nodes: list[TreeNode] = field(default_factory=list)

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def depth(self) -> int:
        if not self.nodes:
            return 0
        depths = {0: 0}
        out = 0
        for i, node in enumerate(self.nodes):
            d = depths[i]
            out = max(out, d)
            if not node.is_leaf:
                depths[node.left] = d + 1
                depths[node.right] = d + 1
        return out

    def predict_values(self, values: np.ndarray) -> np.ndarray:
        """Leaf value per row of a raw (n, F) matrix; NaN routed by missing direction."""
        values = np.asarray(values, dtype=np.float64)
        out = np.empty(values.shape[0], dtype=np.float64)
        stack = [(0, np.arange(values.shape[0]))]
        while stack:
            nid, rows = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf:
                out[rows] = node.value
                continue
            x = values[rows, node.feature]
            go_left = x <= node.threshold  # NaN compares false
            if node.missing_goes_left:
                go_left |= np.isnan(x)
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out


class HistSource(Protocol):
    """Anything that can produce node histograms and apply split routing."""

    def node_hist(self, node_id: int) -> GradHistogram: ...

    def expand(
        self,
        node_id: int,
        feature: int,
        bin_threshold: int,
        missing_goes_left: bool,
        left_id: int,
        right_id: int,
        build_id: int | None,
    ) -> GradHistogram | None: ...


@dataclass
class _NodeState:
    g: float
    h: float
    count: float
    depth: int


def grow_best_first(
    source: HistSource,
    config,
    edges: Sequence[np.ndarray],
    *,
    objective: str = "boost",
    leaf_value: Callable[[float, float], float] | None = None,
    feature_picker: Callable[[int], np.ndarray | None] | None = None,
) -> DecisionTree:
    """Grow one tree best-first from a histogram source (see module docstring).

    Root row set for node id 0 must already be installed in the source.
    """
    if leaf_value is None:
        leaf_value = lambda g, h: leaf_weight(g, h, config.lam)  # noqa: E731

    nodes = [TreeNode()]
    root_hist = source.node_hist(0)
    g0, h0, c0 = root_hist.total()
    states = {0: _NodeState(g0, h0, c0, 0)}
    hists: dict[int, GradHistogram] = {0: root_hist}
    heap: list[tuple[float, int, SplitCandidate]] = []

    def consider(node_id: int) -> None:
        st = states[node_id]
        expandable = (
            st.depth < config.max_depth
            and st.count >= 2
            and st.h >= 2 * config.min_child_weight
        )
        if not expandable:
            hists.pop(node_id, None)
            return
        allowed = feature_picker(node_id) if feature_picker is not None else None
        cand = find_best_split(
            hists[node_id],
            (st.g, st.h, st.count),
            config,
            objective=objective,
            allowed_features=allowed,
        )
        if cand is None:
            hists.pop(node_id, None)
        else:
            heapq.heappush(heap, (-cand.gain, node_id, cand))

    consider(0)
    n_leaves = 1
    while heap:
        if n_leaves + 1 > config.max_leaves:
            break
        _, nid, cand = heapq.heappop(heap)
        parent_state = states[nid]
        parent_hist = hists.pop(nid)
        left_id = len(nodes)
        right_id = left_id + 1
        nodes.append(TreeNode())
        nodes.append(TreeNode())
        nodes[nid] = TreeNode(
            feature=cand.feature,
            bin_threshold=cand.bin_threshold,
            threshold=float(edges[cand.feature][cand.bin_threshold]),
            missing_goes_left=cand.missing_goes_left,
            left=left_id,
            right=right_id,
            gain=cand.gain,
        )
        n_leaves += 1
        depth = parent_state.depth + 1
        states[left_id] = _NodeState(*cand.left_sums, depth)
        states[right_id] = _NodeState(*cand.right_sums, depth)

        def needs_hist(node_id: int) -> bool:
            st = states[node_id]
            return (
                st.depth < config.max_depth
                and st.count >= 2
                and st.h >= 2 * config.min_child_weight
            )

        need_left, need_right = needs_hist(left_id), needs_hist(right_id)
        built = derived = None
        if need_left and need_right:
            # build the larger child, derive the sibling by subtraction
            if states[right_id].count > states[left_id].count:
                built, derived = right_id, left_id
            else:
                built, derived = left_id, right_id
        elif need_left:
            built = left_id
        elif need_right:
            built = right_id
        built_hist = source.expand(
            nid,
            cand.feature,
            cand.bin_threshold,
            cand.missing_goes_left,
            left_id,
            right_id,
            built,
        )
        if built is not None:
            hists[built] = built_hist
        if derived is not None:
            hists[derived] = parent_hist.subtract(built_hist)
        del parent_hist
        if need_left:
            consider(left_id)
        if need_right:
            consider(right_id)

    for nid, node in enumerate(nodes):
        if node.is_leaf:
            st = states[nid]
            node.value = leaf_value(st.g, st.h)
    return DecisionTree(nodes=nodes)


def grow_tree(binned, g: np.ndarray, h: np.ndarray, config, reducer=None) -> DecisionTree:
    """Grow a boosting tree over full-matrix gradients with a given reducer.

    This is the single-process entry point; the reducer combines the fixed
    per-partition histograms (jamcast.parallel.reduce_histograms by default).
    """
    # local import keeps grower importable without the parallel module
    from jamcast.parallel import reduce_histograms
    from jamcast.trees.engine import InlineSource

    if reducer is None:
        reducer = reduce_histograms
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if g.shape != (binned.n_rows,) or h.shape != (binned.n_rows,):
        raise ValidationError("g and h must be per-row vectors")
    source = InlineSource(binned, reducer)
    source.set_gradients(g, h)
    return grow_best_first(source, config, binned.edges, objective="boost")
