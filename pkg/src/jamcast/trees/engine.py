"""Training execution engines: the same partition-local code runs inline or forked.

A PartitionState owns one contiguous row range: its labels, margins,
gradients and per-node row sets. Histograms for a node are always the
fixed-shape reduction of the per-partition histograms in partition order
(see jamcast.parallel), so an inline engine and a process pool produce
bit-identical trees.

The pool forks workers after the binned matrix exists (inherited
copy-on-write) and clamps the process count to the machine's cores; the
requested n_workers stays a purely logical degree of parallelism. Workers
write per-partition histograms into a fork-inherited shared-memory block
instead of piping them, and a split plus the resulting child histogram
build travel as one round-trip, so per-node traffic is a few bytes.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from typing import Sequence

import numpy as np

from jamcast.parallel import N_HIST_PARTS, partition_rows, reduce_histograms
from jamcast.trees.grower import GradHistogram, build_histograms, sigmoid


class PartitionState:
    """Row-partition-local training state; identical arithmetic everywhere."""

    def __init__(self, lo: int, hi: int, binned, labels: np.ndarray):
        self.lo = lo
        self.hi = hi
        self.binned = binned
        self.y = np.asarray(labels[lo:hi], dtype=np.float64)
        self.margin: np.ndarray | None = None
        self.g = np.zeros(hi - lo)
        self.h = np.zeros(hi - lo)
        self.nodes: dict[int, np.ndarray] = {}

    def _all_rows(self) -> np.ndarray:
        return np.arange(self.lo, self.hi, dtype=np.int64)

    def init_boost(self, base_margin: float) -> None:
        self.margin = np.full(self.hi - self.lo, base_margin, dtype=np.float64)

    def begin_round(self, second_order: bool) -> None:
        p = sigmoid(self.margin)
        self.g = p - self.y
        self.h = p * (1.0 - p) if second_order else np.ones_like(p)
        self.nodes = {0: self._all_rows()}

    def set_gradients(self, g: np.ndarray, h: np.ndarray) -> None:
        """Externally supplied per-row gradients for this partition's range."""
        self.g = np.asarray(g, dtype=np.float64)
        self.h = np.asarray(h, dtype=np.float64)
        self.nodes = {0: self._all_rows()}

    def begin_tree_weighted(self, mult: np.ndarray) -> None:
        """Bootstrap-weighted tree start: g = y * w, h = w, rows with w > 0."""
        w = np.asarray(mult, dtype=np.float64)
        self.g = self.y * w
        self.h = w
        self.nodes = {0: np.nonzero(w > 0)[0].astype(np.int64) + self.lo}

    def node_hist(self, node_id: int) -> np.ndarray:
        hist = build_histograms(
            self.binned, self.nodes[node_id], self.g, self.h, row_offset=self.lo
        )
        return hist.sums

    def apply_split(
        self,
        node_id: int,
        feature: int,
        bin_threshold: int,
        missing_goes_left: bool,
        left_id: int,
        right_id: int,
    ) -> None:
        rows = self.nodes.pop(node_id)
        c = self.binned.codes[feature][rows]
        go_left = c <= bin_threshold
        if missing_goes_left:
            go_left |= c == self.binned.missing_bin[feature]
        self.nodes[left_id] = rows[go_left]
        self.nodes[right_id] = rows[~go_left]

    def apply_leaf_deltas(self, deltas: Sequence[tuple[int, float]]) -> None:
        for nid, delta in deltas:
            rows = self.nodes.get(nid)
            if rows is not None and rows.size:
                self.margin[rows - self.lo] += delta
        self.nodes = {}


def _make_states(binned, labels: np.ndarray) -> list[PartitionState]:
    plan = partition_rows(binned.n_rows, N_HIST_PARTS)
    return [PartitionState(lo, hi, binned, labels) for lo, hi in plan.ranges]


class InlineSource:
    """Single-process engine over the fixed partition grain."""

    def __init__(self, binned, reducer=reduce_histograms, labels: np.ndarray | None = None):
        if labels is None:
            labels = np.zeros(binned.n_rows, dtype=np.float64)
        self.binned = binned
        self.reducer = reducer
        self.states = _make_states(binned, labels)

    # -- gradient/bookkeeping entry points -------------------------------
    def init_boost(self, base_margin: float) -> None:
        for st in self.states:
            st.init_boost(base_margin)

    def begin_round(self, second_order: bool) -> None:
        for st in self.states:
            st.begin_round(second_order)

    def set_gradients(self, g: np.ndarray, h: np.ndarray) -> None:
        for st in self.states:
            st.set_gradients(g[st.lo : st.hi], h[st.lo : st.hi])

    def begin_tree_weighted(self, mult: np.ndarray) -> None:
        for st in self.states:
            st.begin_tree_weighted(mult[st.lo : st.hi])

    def finalize_tree(self, deltas: Sequence[tuple[int, float]]) -> None:
        for st in self.states:
            st.apply_leaf_deltas(deltas)

    # -- HistSource protocol ---------------------------------------------
    def node_hist(self, node_id: int) -> GradHistogram:
        parts = [
            GradHistogram(sums=st.node_hist(node_id), n_real_bins=self.binned.n_real_bins)
            for st in self.states
        ]
        return self.reducer(parts)

    def apply_split(self, node_id, feature, bin_threshold, missing_goes_left, left_id, right_id):
        for st in self.states:
            st.apply_split(node_id, feature, bin_threshold, missing_goes_left, left_id, right_id)

    def expand(
        self, node_id, feature, bin_threshold, missing_goes_left, left_id, right_id, build_id
    ) -> GradHistogram | None:
        """Apply a split, then build the requested child histogram (if any)."""
        self.apply_split(node_id, feature, bin_threshold, missing_goes_left, left_id, right_id)
        return self.node_hist(build_id) if build_id is not None else None

    def close(self) -> None:
        pass


def _worker_main(conn, part_ids, part_ranges, binned, labels, shm_buf, hist_shape) -> None:
    """Forked worker loop: owns a set of partitions, answers lockstep commands.

    Histograms are written into this worker's slots of the shared buffer;
    replies carry no payload.
    """
    states = [PartitionState(lo, hi, binned, labels) for lo, hi in part_ranges]
    slots = np.frombuffer(shm_buf, dtype=np.float64).reshape((N_HIST_PARTS,) + hist_shape)

    def write_hists(node_id: int) -> None:
        for pid, st in zip(part_ids, states):
            slots[pid] = st.node_hist(node_id)

    try:
        while True:
            msg = conn.recv()
            op = msg[0]
            if op == "stop":
                break
            elif op == "hist":
                write_hists(msg[1])
                conn.send(None)
            elif op == "expand":
                _, node_id, fargs, left_id, right_id, build_id = msg
                for st in states:
                    st.apply_split(node_id, *fargs, left_id, right_id)
                if build_id is not None:
                    write_hists(build_id)
                conn.send(None)
            elif op == "init_boost":
                for st in states:
                    st.init_boost(msg[1])
                conn.send(None)
            elif op == "round":
                for st in states:
                    st.begin_round(msg[1])
                conn.send(None)
            elif op == "weighted":
                for st, m in zip(states, msg[1]):
                    st.begin_tree_weighted(m)
                conn.send(None)
            elif op == "split":
                for st in states:
                    st.apply_split(*msg[1])
                conn.send(None)
            elif op == "leaves":
                for st in states:
                    st.apply_leaf_deltas(msg[1])
                conn.send(None)
            else:  # pragma: no cover - protocol misuse
                raise RuntimeError(f"unknown op {op!r}")
    finally:
        conn.close()


class PoolSource:
    """Engine backed by forked worker processes.

    The fixed partition grain is distributed contiguously over workers;
    per-partition histograms come back in partition order and are reduced
    exactly as in InlineSource, so results are bit-identical. No more
    processes are forked than the machine has cores: extra requested
    workers would only contend for the same cores.
    """

    def __init__(self, binned, n_workers: int, reducer=reduce_histograms, labels=None):
        if labels is None:
            labels = np.zeros(binned.n_rows, dtype=np.float64)
        self.binned = binned
        self.reducer = reducer
        self.n_workers = n_workers
        n_procs = max(1, min(n_workers, N_HIST_PARTS, os.cpu_count() or 1))
        plan = partition_rows(binned.n_rows, N_HIST_PARTS)
        assign = partition_rows(N_HIST_PARTS, n_procs)
        self._hist_shape = (binned.n_features, binned.hist_bins, 3)
        ctx = mp.get_context("fork")
        shm_elems = N_HIST_PARTS * int(np.prod(self._hist_shape))
        self._shm = ctx.RawArray("d", shm_elems)
        self._slots = np.frombuffer(self._shm, dtype=np.float64).reshape(
            (N_HIST_PARTS,) + self._hist_shape
        )
        self._conns = []
        self._procs = []
        self._worker_parts: list[tuple[tuple[int, int], ...]] = []
        for w_lo, w_hi in assign.ranges:
            part_ids = list(range(w_lo, w_hi))
            parts = plan.ranges[w_lo:w_hi]
            self._worker_parts.append(parts)
            parent_conn, child_conn = ctx.Pipe()
            proc = ctx.Process(
                target=_worker_main,
                args=(child_conn, part_ids, parts, binned, labels, self._shm, self._hist_shape),
                daemon=True,
            )
            proc.start()
            child_conn.close()
            self._conns.append(parent_conn)
            self._procs.append(proc)

    def _broadcast(self, msg) -> None:
        for conn in self._conns:
            conn.send(msg)
        for conn in self._conns:
            conn.recv()

    def _collect(self) -> GradHistogram:
        parts = [
            GradHistogram(sums=self._slots[p], n_real_bins=self.binned.n_real_bins)
            for p in range(N_HIST_PARTS)
        ]
        return self.reducer(parts)

    def init_boost(self, base_margin: float) -> None:
        self._broadcast(("init_boost", base_margin))

    def begin_round(self, second_order: bool) -> None:
        self._broadcast(("round", second_order))

    def begin_tree_weighted(self, mult: np.ndarray) -> None:
        for conn, parts in zip(self._conns, self._worker_parts):
            conn.send(("weighted", [mult[lo:hi] for lo, hi in parts]))
        for conn in self._conns:
            conn.recv()

    def finalize_tree(self, deltas: Sequence[tuple[int, float]]) -> None:
        self._broadcast(("leaves", list(deltas)))

    def node_hist(self, node_id: int) -> GradHistogram:
        self._broadcast(("hist", node_id))
        return self._collect()

    def apply_split(self, node_id, feature, bin_threshold, missing_goes_left, left_id, right_id):
        self._broadcast(
            ("split", (node_id, feature, bin_threshold, missing_goes_left, left_id, right_id))
        )

    def expand(
        self, node_id, feature, bin_threshold, missing_goes_left, left_id, right_id, build_id
    ) -> GradHistogram | None:
        self._broadcast(
            ("expand", node_id, (feature, bin_threshold, missing_goes_left), left_id, right_id, build_id)
        )
        return self._collect() if build_id is not None else None

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.send(("stop",))
                conn.close()
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=10)
            if proc.is_alive():  # pragma: no cover - defensive cleanup
                proc.terminate()
        self._conns = []
        self._procs = []


def open_engine(binned, labels: np.ndarray, n_workers: int):
    """Inline engine for one worker, forked pool otherwise (fork platforms only)."""
    if n_workers <= 1:
        return InlineSource(binned, labels=labels)
    try:
        mp.get_context("fork")
    except ValueError:  # pragma: no cover - non-fork platform fallback
        return InlineSource(binned, labels=labels)
    return PoolSource(binned, n_workers, labels=labels)
