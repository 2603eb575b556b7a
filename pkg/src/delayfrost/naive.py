"""Naive baseline: flood every raw gradient hop by hop over the delayed graph.

Knowledge moves under the same stale-read rule as the tracker: at tick t node
i sees what in-neighbour j knew at tick t - tau_ji(t), and may relay it in the
same tick. A value that reached j at tick A therefore reaches i at the first
t >= A with t - tau_ji(t) >= A, which is at most A + tau_max.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .delay import DelayModel
from .graph import DirectedGraph
from .kernels import delay_block


@dataclass(frozen=True)
class FloodResult:
    arrival: np.ndarray      # (N sources, N nodes) tick at which node learns source's value
    start: int
    tau_max: int

    @property
    def completion(self) -> np.ndarray:
        """Per-node tick at which every source value has arrived."""
        return self.arrival.max(axis=0)

    @property
    def worst_case(self) -> int:
        return int(self.completion.max())

    @property
    def bound(self) -> int:
        return worst_case_bound(self.tau_max, self.arrival.shape[0])


def worst_case_bound(tau_max: int, n_nodes: int) -> int:
    """Longest simple path has N - 1 hops, each costing at most tau_max ticks."""
    return int(tau_max) * (int(n_nodes) - 1)


def flood_completion(graph: DirectedGraph, delays: DelayModel, start: int = 0) -> FloodResult:
    """Earliest-arrival times of every source's value at every node
    (time-dependent Dijkstra; delays bounded so FIFO holds per window)."""
    n = graph.node_count
    edges = [(j, i) for j, i in graph.sorted_edges() if j != i]
    src = np.array([j for j, _ in edges], dtype=np.int64)
    dst = np.array([i for _, i in edges], dtype=np.int64)
    tau_max = delays.tau_max
    horizon = start + worst_case_bound(tau_max, n) + tau_max + 1
    kind, keys, cols, lo, hi, seed, sched = delays.kernel_args(src, dst)
    table = delay_block(kind, start, horizon, keys, cols, lo, hi, seed, sched)  # (T, E)
    out_edges: list[list[int]] = [[] for _ in range(n)]
    for e, (j, _) in enumerate(edges):
        out_edges[j].append(e)
    ticks = np.arange(start, horizon)

    arrival = np.full((n, n), np.iinfo(np.int64).max, dtype=np.int64)
    for s in range(n):
        best = arrival[s]
        best[s] = start
        heap = [(start, s)]
        done = np.zeros(n, dtype=bool)
        while heap:
            a, j = heapq.heappop(heap)
            if done[j]:
                continue
            done[j] = True
            lo_idx = a - start
            window = slice(lo_idx, lo_idx + tau_max + 1)
            for e in out_edges[j]:
                i = dst[e]
                if done[i]:
                    continue
                ok = np.nonzero(ticks[window] - table[window, e] >= a)[0]
                t_arr = int(ticks[lo_idx + ok[0]])
                if t_arr < best[i]:
                    best[i] = t_arr
                    heapq.heappush(heap, (t_arr, i))
    if np.any(arrival == np.iinfo(np.int64).max):
        raise ValueError("graph is not strongly connected; some values never arrive")
    return FloodResult(arrival=arrival, start=int(start), tau_max=int(tau_max))


def naive_estimates(flood: FloodResult, values: np.ndarray, weights: np.ndarray,
                    ticks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node running estimate of sum_j w_j v_j from the values received so far.

    Before completion a node renormalises over what it has: sum_recv w_j v_j /
    sum_recv w_j. Returns (estimates (T, N, n), complete flags (T, N))."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    w = np.asarray(weights, dtype=float)
    ticks = np.asarray(ticks)
    known = flood.arrival[None, :, :] <= ticks[:, None, None]          # (T, src, node)
    wk = known * w[None, :, None]
    num = np.einsum("tsn,sd->tnd", wk, values)
    den = wk.sum(axis=1)
    est = num / den[:, :, None] * w.sum()
    return est, known.all(axis=1)
