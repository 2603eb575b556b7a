"""Directed communication graphs and their stochastic weight matrices."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

ROW = "row_stochastic"
COLUMN = "column_stochastic"
DOUBLY = "doubly_stochastic"
WEIGHT_CLASSES = (ROW, COLUMN, DOUBLY)

STOCHASTIC_TOL = 1e-12
FLE_TOL = 1e-12
FLE_MAX_ITER = 1_000_000


class GraphError(ValueError):
    """Raised for malformed or unsuitable graphs."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative numerical routine fails to converge."""


@dataclass(frozen=True)
class DirectedGraph:
    """A directed graph on nodes ``0..node_count-1``.

    ``edges`` holds ordered pairs ``(j, i)`` meaning *j sends to i*. Self-loops are
    never stored as edges; ``self_loops`` records whether weight construction
    should put mass on the diagonal.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    self_loops: bool = True

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphError(f"node_count must be >= 1, got {self.node_count}")
        clean = set()
        for j, i in self.edges:
            j, i = int(j), int(i)
            if not (0 <= j < self.node_count and 0 <= i < self.node_count):
                raise GraphError(f"edge ({j}, {i}) out of range for {self.node_count} nodes")
            if i == j:
                raise GraphError(f"self-loop ({j}, {i}) must not be listed; use self_loops=True")
            clean.add((j, i))
        object.__setattr__(self, "edges", frozenset(clean))

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, k in self.edges if k == i)

    def out_neighbors(self, j: int) -> list[int]:
        return sorted(i for k, i in self.edges if k == j)

    def in_degree(self, i: int) -> int:
        return len(self.in_neighbors(i))

    def out_degree(self, j: int) -> int:
        return len(self.out_neighbors(j))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def diameter(self) -> int:
        """Longest shortest directed path (hops). Requires strong connectivity."""
        worst = 0
        for source in range(self.node_count):
            dist = _bfs_distances(self, source, reverse=False)
            if min(dist) < 0:
                raise GraphError("diameter undefined: graph is not strongly connected")
            worst = max(worst, max(dist))
        return worst

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edges": [list(e) for e in self.sorted_edges()],
            "self_loops": self.self_loops,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DirectedGraph":
        return cls(
            node_count=int(data["node_count"]),
            edges=frozenset((int(j), int(i)) for j, i in data["edges"]),
            self_loops=bool(data.get("self_loops", True)),
        )


def _adjacency_lists(g: DirectedGraph, reverse: bool) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.node_count)]
    for j, i in g.edges:
        if reverse:
            adj[i].append(j)
        else:
            adj[j].append(i)
    return adj


def _bfs_distances(g: DirectedGraph, source: int, reverse: bool) -> list[int]:
    adj = _adjacency_lists(g, reverse)
    dist = [-1] * g.node_count
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def is_strongly_connected(g: DirectedGraph) -> bool:
    """True iff every node reaches every other node along directed edges."""
    if g.node_count == 1:
        return True
    forward = _bfs_distances(g, 0, reverse=False)
    backward = _bfs_distances(g, 0, reverse=True)
    return min(forward) >= 0 and min(backward) >= 0


def _default_edge_prob(n: int) -> float:
    if n <= 2:
        return 1.0
    return min(1.0, 2.0 * math.log(n) / n)


def build_graph(
    node_count: int,
    topology: str = "cycle",
    seed: int | None = None,
    *,
    edges: Iterable[tuple[int, int]] | None = None,
    edge_prob: float | None = None,
    max_tries: int = 10_000,
) -> DirectedGraph:
    """Construct a strongly connected directed graph.

    topology:
        ``cycle``: edges ``k -> k+1 (mod N)``.
        ``random_strongly_connected``: directed Erdos-Renyi draws with probability
        ``edge_prob`` (default ``2 ln N / N``), redrawn until strongly connected.
        ``from_edge_list``: the given ``edges``; rejected if not strongly connected.
    """
    if node_count < 1:
        raise GraphError(f"node_count must be >= 1, got {node_count}")

    if topology == "cycle":
        es = {(k, (k + 1) % node_count) for k in range(node_count)} if node_count > 1 else set()
        return DirectedGraph(node_count, frozenset(es))

    if topology == "random_strongly_connected":
        rng = np.random.default_rng(seed)
        p = _default_edge_prob(node_count) if edge_prob is None else float(edge_prob)
        if not 0.0 < p <= 1.0:
            raise GraphError(f"edge_prob must lie in (0, 1], got {p}")
        for _ in range(max_tries):
            mask = rng.random((node_count, node_count)) < p
            np.fill_diagonal(mask, False)
            js, is_ = np.nonzero(mask)
            g = DirectedGraph(node_count, frozenset(zip(js.tolist(), is_.tolist())))
            if is_strongly_connected(g):
                return g
        raise GraphError(
            f"no strongly connected draw in {max_tries} tries (N={node_count}, p={p}); raise edge_prob"
        )

    if topology == "from_edge_list":
        if edges is None:
            raise GraphError("topology 'from_edge_list' requires edges")
        g = DirectedGraph(node_count, frozenset((int(j), int(i)) for j, i in edges))
        if not is_strongly_connected(g):
            unreachable = [k for k, d in enumerate(_bfs_distances(g, 0, False)) if d < 0]
            unreaching = [k for k, d in enumerate(_bfs_distances(g, 0, True)) if d < 0]
            raise GraphError(
                "edge list is not strongly connected: "
                f"nodes unreachable from 0: {unreachable}; nodes that cannot reach 0: {unreaching}"
            )
        return g

    raise GraphError(f"unknown topology {topology!r}")


@dataclass(frozen=True)
class WeightMatrix:
    """Nonnegative weights ``a_ij`` (row i receives from column j) plus the cached
    first left eigenvector ``fle`` (sums to one)."""

    entries: np.ndarray
    kind: str
    graph: DirectedGraph | None = None
    fle: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"weight matrix must be square, got shape {a.shape}")
        if self.kind not in WEIGHT_CLASSES:
            raise GraphError(f"unknown stochasticity class {self.kind!r}")
        if np.any(a < 0):
            raise GraphError("weights must be nonnegative")
        _check_class(a, self.kind)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        u = first_left_eigenvector(a)
        u.setflags(write=False)
        object.__setattr__(self, "fle", u)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "entries": self.entries.tolist(),
            "graph": None if self.graph is None else self.graph.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeightMatrix":
        graph = None if data.get("graph") is None else DirectedGraph.from_dict(data["graph"])
        return cls(np.asarray(data["entries"], dtype=float), data["kind"], graph)


def _check_class(a: np.ndarray, kind: str) -> None:
    if kind in (ROW, DOUBLY):
        dev = np.max(np.abs(a.sum(axis=1) - 1.0))
        if dev > STOCHASTIC_TOL:
            raise GraphError(f"rows do not sum to 1 (max deviation {dev:.3e})")
    if kind in (COLUMN, DOUBLY):
        dev = np.max(np.abs(a.sum(axis=0) - 1.0))
        if dev > STOCHASTIC_TOL:
            raise GraphError(f"columns do not sum to 1 (max deviation {dev:.3e})")


def _pattern(g: DirectedGraph) -> np.ndarray:
    mask = np.zeros((g.node_count, g.node_count), dtype=bool)
    for j, i in g.edges:
        mask[i, j] = True
    np.fill_diagonal(mask, True)
    return mask


def _sinkhorn(mask: np.ndarray, tol: float = 1e-15, max_iter: int = 100_000) -> np.ndarray:
    a = mask.astype(float)
    for _ in range(max_iter):
        a /= a.sum(axis=1, keepdims=True)
        col = a.sum(axis=0)
        if np.max(np.abs(col - 1.0)) < tol:
            return a
        a /= col[None, :]
        row = a.sum(axis=1)
        if np.max(np.abs(row - 1.0)) < tol:
            return a
    raise GraphError("pattern admits no doubly stochastic weights (Sinkhorn balancing did not converge)")


def build_weights(g: DirectedGraph, kind: str = ROW, rule: str = "uniform_in_degree") -> WeightMatrix:
    """Uniform ``1/(degree+1)`` weights on the self-looped graph.

    ``uniform_in_degree`` gives ``a_ij = 1/(d_i^- + 1)`` over in-neighbours and
    self (row-stochastic); ``uniform_out_degree`` gives ``a_ij = 1/(d_j^+ + 1)``
    over out-edges and self (column-stochastic). ``doubly_stochastic`` keeps the
    pattern and rebalances with Sinkhorn scaling unless the uniform rule is
    already doubly stochastic (regular graphs).
    """
    if not is_strongly_connected(g):
        raise GraphError("weights require a strongly connected graph")
    if kind not in WEIGHT_CLASSES:
        raise GraphError(f"unknown stochasticity class {kind!r}")
    if not g.self_loops:
        g = DirectedGraph(g.node_count, g.edges, self_loops=True)
    mask = _pattern(g).astype(float)

    if rule == "uniform_in_degree":
        a = mask / mask.sum(axis=1, keepdims=True)
    elif rule == "uniform_out_degree":
        a = mask / mask.sum(axis=0, keepdims=True)
    else:
        raise GraphError(f"unknown weight rule {rule!r}")

    if kind == DOUBLY:
        if not (np.allclose(a.sum(axis=0), 1.0, atol=STOCHASTIC_TOL, rtol=0)
                and np.allclose(a.sum(axis=1), 1.0, atol=STOCHASTIC_TOL, rtol=0)):
            a = _sinkhorn(mask > 0)
    elif kind == ROW and rule != "uniform_in_degree":
        raise GraphError("row_stochastic weights need rule 'uniform_in_degree'")
    elif kind == COLUMN and rule != "uniform_out_degree":
        raise GraphError("column_stochastic weights need rule 'uniform_out_degree'")
    return WeightMatrix(a, kind, g)


def weights_from_edge_list(
    node_count: int,
    weighted_edges: Iterable[tuple[int, int, float]],
    kind: str = ROW,
    self_weights: Iterable[float] | None = None,
) -> WeightMatrix:
    """Explicit weights. ``weighted_edges`` are ``(j, i, a_ij)`` triples; diagonal
    entries come from ``self_weights`` or, if omitted, fill each row (row class)
    or column (column class) up to one."""
    a = np.zeros((node_count, node_count))
    es = set()
    for j, i, w in weighted_edges:
        if w <= 0:
            raise GraphError(f"edge ({j}, {i}) has nonpositive weight {w}")
        a[int(i), int(j)] = float(w)
        es.add((int(j), int(i)))
    g = build_graph(node_count, "from_edge_list", edges=es)
    if self_weights is not None:
        np.fill_diagonal(a, np.asarray(list(self_weights), dtype=float))
    elif kind == COLUMN:
        np.fill_diagonal(a, 1.0 - a.sum(axis=0))
    else:
        np.fill_diagonal(a, 1.0 - a.sum(axis=1))
    if np.any(np.diag(a) <= 0):
        raise GraphError("self weights must be positive (primitivity)")
    return WeightMatrix(a, kind, g)


def first_left_eigenvector(
    w: WeightMatrix | np.ndarray, tol: float = FLE_TOL, max_iter: int = FLE_MAX_ITER
) -> np.ndarray:
    """Perron left eigenvector ``u`` with ``u^T A = u^T`` and ``sum(u) = 1``.

    Power iteration on ``A^T`` from the first basis vector, stopping once
    successive iterates differ by less than ``tol`` in max-norm. Failure to
    converge signals a non-primitive (e.g. periodic) matrix.
    """
    a = w.entries if isinstance(w, WeightMatrix) else np.asarray(w, dtype=float)
    n = a.shape[0]
    if n == 1:
        return np.ones(1)
    at = a.T.copy()
    v = np.zeros(n)
    v[0] = 1.0
    for _ in range(int(max_iter)):
        nxt = at @ v
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - v)) < tol:
            if np.any(nxt <= 0):
                raise ConvergenceError("left eigenvector has nonpositive entries; matrix is not primitive")
            return _polish(a, nxt)
        v = nxt
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps; weight matrix is likely not primitive"
    )


def _polish(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One least-squares solve of [A^T - I; 1^T] u = [0; 1]. Power iteration
    stops a factor 1/(1 - rho) short of its step tolerance; this recovers
    machine precision. Keeps the power iterate if the solve is no better."""
    n = a.shape[0]
    m = np.vstack([a.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    v = np.linalg.lstsq(m, rhs, rcond=None)[0]
    if np.any(v <= 0):
        return u
    res_v = np.max(np.abs(v @ a - v))
    res_u = np.max(np.abs(u @ a - u))
    return v / v.sum() if res_v < res_u else u


def contraction_factor(w: WeightMatrix | np.ndarray) -> float:
    """Spectral radius of ``A - 1 u^T``: the per-step consensus contraction."""
    if isinstance(w, WeightMatrix):
        a, u = w.entries, w.fle
    else:
        a = np.asarray(w, dtype=float)
        u = first_left_eigenvector(a)
    m = a - np.outer(np.ones(a.shape[0]), u)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


# ---------------------------------------------------------------- edge-list IO

def parse_edge_list(text: str) -> list[tuple[int, int, float | None]]:
    """Parse ``j i [weight]`` lines (0-indexed). ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphError(f"line {lineno}: expected 'j i [weight]', got {raw!r}")
        j, i = int(parts[0]), int(parts[1])
        weight = float(parts[2]) if len(parts) == 3 else None
        out.append((j, i, weight))
    return out


def format_edge_list(w: WeightMatrix | DirectedGraph) -> str:
    lines = []
    if isinstance(w, WeightMatrix):
        a = w.entries
        for i in range(w.n):
            for j in range(w.n):
                if i != j and a[i, j] > 0:
                    lines.append(f"{j} {i} {float(a[i, j])!r}")
    else:
        lines = [f"{j} {i}" for j, i in w.sorted_edges()]
    return "\n".join(lines) + "\n"


def load_edge_list(path: str | Path, node_count: int | None = None, kind: str = ROW):
    """Read an edge-list file. Returns a WeightMatrix if every line carries a
    weight, otherwise a DirectedGraph."""
    triples = parse_edge_list(Path(path).read_text())
    n = node_count if node_count is not None else 1 + max(max(j, i) for j, i, _ in triples)
    if triples and all(w is not None for _, _, w in triples):
        return weights_from_edge_list(n, triples, kind)
    if any(w is not None for _, _, w in triples):
        raise GraphError("edge list mixes weighted and unweighted lines")
    return build_graph(n, "from_edge_list", edges=[(j, i) for j, i, _ in triples])
