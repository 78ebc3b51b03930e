"""Undirected simple graphs and the set statistics used by the detector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for invalid graph input or out-of-range node sets."""


class UndefinedCriterionError(ValueError):
    """Raised when a criterion is evaluated on a set with no incident edges."""


class EdgeListParseError(GraphError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LoadReport:
    n_lines: int = 0
    n_edges: int = 0
    n_duplicates: int = 0
    n_self_loops: int = 0


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph in CSR layout.

    Parameters
    ----------
    indptr, indices : ndarray
        CSR row pointers and sorted column indices of the symmetric 0/1
        adjacency matrix.
    labels : tuple of str, optional
        Original node identifiers, index-aligned with the dense ids.
    """

    indptr: np.ndarray
    indices: np.ndarray
    labels: tuple | None = None
    report: LoadReport = field(default_factory=LoadReport)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr).astype(np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def _inv_sqrt_deg(self) -> np.ndarray:
        d = self.degrees.astype(np.float64)
        out = np.zeros_like(d)
        np.divide(1.0, np.sqrt(d), out=out, where=d > 0)
        return out

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Return ``D^{-1/2} A D^{-1/2}`` with zero rows for isolated nodes."""
        s = self._inv_sqrt_deg
        a = self.adjacency
        data = s[self._rows] * s[a.indices]
        return sp.csr_matrix((data, a.indices, a.indptr), shape=(self.n, self.n))

    @cached_property
    def _rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.degrees)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        """Return the ``(m, 2)`` array of edges with ``i < j``."""
        mask = self._rows < self.indices
        return np.column_stack([self._rows[mask], self.indices[mask]])

    def to_dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph on ``nodes`` (relabelled 0..k-1 in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        sub = self.adjacency[nodes][:, nodes].tocsr()
        sub.sort_indices()
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in nodes)
        return Graph(sub.indptr.astype(np.int64), sub.indices.astype(np.int64), labels)

    # constructors

    @classmethod
    def from_edges(cls, n: int, edges, labels=None, report=None) -> "Graph":
        """Build from an ``(m, 2)`` integer edge array over nodes ``0..n-1``.

        Self-loops are dropped and duplicates (in either orientation)
        collapsed.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError(f"edge endpoint out of range for n={n}")
        e = e[e[:, 0] != e[:, 1]]
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        a = sp.csr_matrix(
            (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n)
        )
        a.sum_duplicates()
        a.sort_indices()
        return cls(
            a.indptr.astype(np.int64),
            a.indices.astype(np.int64),
            None if labels is None else tuple(labels),
            report or LoadReport(n_edges=a.nnz // 2),
        )

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        """Build from a dense or sparse symmetric adjacency matrix.

        Any nonzero off-diagonal entry is an edge; weights and the diagonal
        are ignored.
        """
        a = sp.csr_matrix(adj)
        if a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got {a.shape}")
        a = sp.triu(a, k=1).tocoo()
        mask = a.data != 0
        return cls.from_edges(a.shape[0], np.column_stack([a.row[mask], a.col[mask]]))


def from_edge_list(pairs: Iterable[Sequence]) -> Graph:
    """Build a graph from node-id pairs.

    Ids may be any hashable values; they are mapped to dense indices in
    first-seen order and kept as string labels. Duplicate edges and
    self-loops are dropped and counted in ``graph.report``.
    """
    index: dict = {}
    edges = []
    seen = set()
    n_dup = n_loop = n_lines = 0
    for lineno, pair in enumerate(pairs, start=1):
        n_lines += 1
        if isinstance(pair, str) or len(pair) != 2:
            raise EdgeListParseError(f"expected two node ids, got {pair!r}", lineno)
        ij = []
        for tok in pair:
            key = str(tok)
            if key not in index:
                index[key] = len(index)
            ij.append(index[key])
        i, j = ij
        if i == j:
            n_loop += 1
            continue
        key = (i, j) if i < j else (j, i)
        if key in seen:
            n_dup += 1
            continue
        seen.add(key)
        edges.append(key)
    if not index:
        raise GraphError("edge list is empty")
    report = LoadReport(n_lines, len(edges), n_dup, n_loop)
    return Graph.from_edges(len(index), np.array(edges, dtype=np.int64).reshape(-1, 2),
                            labels=list(index), report=report)


def _iter_edge_file(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            toks = s.split()
            if len(toks) != 2:
                raise EdgeListParseError(
                    f"expected two whitespace-separated node ids, got {len(toks)} tokens", lineno
                )
            yield toks


def read_edge_list(path) -> Graph:
    """Read a whitespace-separated edge-list file ('#' comments allowed)."""
    return from_edge_list(_iter_edge_file(path))


def write_edge_list(g: Graph, path) -> None:
    labels = g.labels or tuple(str(i) for i in range(g.n))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in g.edges():
            fh.write(f"{labels[i]} {labels[j]}\n")


# set statistics and criteria


@dataclass(frozen=True)
class NodeSet:
    members: tuple
    w: int
    b: int
    v: int

    @property
    def size(self) -> int:
        return len(self.members)


def _as_index_array(g: Graph, s) -> np.ndarray:
    if not isinstance(s, np.ndarray):
        s = np.fromiter((int(i) for i in s), dtype=np.int64)
    idx = np.unique(s.astype(np.int64, copy=False))
    if idx.size and (idx[0] < 0 or idx[-1] >= g.n):
        raise GraphError(f"node index out of range for graph with n={g.n}")
    return idx


def set_stats(g: Graph, s) -> NodeSet:
    """Return W(S), B(S) and V(S) for the node set ``s``.

    ``w`` counts each internal edge twice; ``b`` counts cut edges once.
    """
    idx = _as_index_array(g, s)
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    v = int(g.degrees[idx].sum())
    w = int(np.count_nonzero(mask[g._rows] & mask[g.indices]))
    return NodeSet(tuple(idx.tolist()), w, v - w, v)


def psi(g: Graph, s, eta: float) -> float:
    """Tightness ``W(S)/V(S) - eta*|S|``."""
    st = set_stats(g, s)
    if st.v == 0:
        raise UndefinedCriterionError("V(S) = 0: set has no incident edges")
    return st.w / st.v - eta * st.size


def phi(g: Graph, s) -> float:
    """Within-density share ``pW / (pW + pB)``.

    Returns ``-inf`` for sets with fewer than two nodes or when both
    densities are zero. ``pB`` is taken as 0 when ``s`` covers every node.
    """
    st = set_stats(g, s)
    k = st.size
    if k <= 1:
        return -math.inf
    p_w = st.w / (k * (k - 1))
    rest = g.n - k
    p_b = st.b / (k * rest) if rest > 0 else 0.0
    if p_w + p_b == 0:
        return -math.inf
    return p_w / (p_w + p_b)


def membership_vector(g: Graph, s) -> np.ndarray:
    """Unit vector with entries ``sqrt(d_i / V(S))`` on ``s``, zero elsewhere."""
    idx = _as_index_array(g, s)
    d = g.degrees[idx]
    v = int(d.sum())
    if v == 0:
        raise UndefinedCriterionError("V(S) = 0: set has no incident edges")
    u = np.zeros(g.n)
    u[idx] = np.sqrt(d / v)
    return u


def laplacian_apply(g: Graph, x) -> np.ndarray:
    """Return ``Q @ x`` for ``Q = D^{-1/2} A D^{-1/2}``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.n,):
        raise GraphError(f"vector of length {x.shape} does not match n={g.n}")
    return g.laplacian @ x
