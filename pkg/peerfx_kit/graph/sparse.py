"""Row-normalized sparse network operators.

The adjacency is stored once in compressed sparse row form with sorted column
indices per row, so every aggregation iterates in the same order and runs are
bit-reproducible under a fixed seed.
"""

import logging
from collections.abc import Iterable, Sequence
from typing import Union

import numpy as np
import numpy.typing as npt
from scipy import sparse

_log = logging.getLogger(__name__)

FeatureMatrix = npt.NDArray[np.float64]
EdgeLike = Union[Sequence[tuple[int, int]], npt.NDArray[np.integer]]


class GraphError(ValueError):
    """Malformed network input or a dimension mismatch against a graph."""


class SparseGraph:
    """Row-normalized adjacency ``G`` of an undirected simple graph.

    Isolated nodes keep an all-zero row, so ``G·M`` is zero there and ``I − G``
    acts as the identity on them.
    """

    def __init__(self, matrix: sparse.csr_array):
        if matrix.shape[0] != matrix.shape[1]:
            raise GraphError(f"Adjacency must be square, got shape {matrix.shape}")
        self._matrix = matrix

    @property
    def matrix(self) -> sparse.csr_array:
        return self._matrix

    @property
    def n(self) -> int:
        return int(self._matrix.shape[0])

    @property
    def row_ptr(self) -> npt.NDArray[np.int64]:
        return self._matrix.indptr

    @property
    def col_idx(self) -> npt.NDArray[np.int64]:
        return self._matrix.indices

    @property
    def weights(self) -> npt.NDArray[np.float64]:
        return self._matrix.data

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self._matrix.nnz // 2)

    def degrees(self) -> npt.NDArray[np.int64]:
        return np.diff(self.row_ptr).astype(np.int64)

    def neighbors(self, i: int) -> npt.NDArray[np.int64]:
        return self.col_idx[self.row_ptr[i] : self.row_ptr[i + 1]]

    def edges(self) -> npt.NDArray[np.int64]:
        """Undirected edges as an ``(m, 2)`` array with ``i < j``, row-major order."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        cols = self.col_idx.astype(np.int64)
        keep = rows < cols
        return np.column_stack([rows[keep], cols[keep]])

    def to_dense(self) -> FeatureMatrix:
        return self._matrix.toarray()

    def __repr__(self) -> str:
        return f"SparseGraph(n={self.n}, edges={self.num_edges})"


def from_edge_list(edges: EdgeLike, n: int) -> SparseGraph:
    """Build the row-normalized adjacency of an undirected simple graph.

    Each pair is inserted in both directions. Self-loops, out-of-range endpoints
    and duplicated pairs (in either orientation) are rejected.
    """
    if n < 0:
        raise GraphError(f"Node count must be non-negative, got {n}")
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError(f"Edges must be node pairs, got array of shape {arr.shape}")

    src, dst = arr[:, 0], arr[:, 1]
    bad = (src < 0) | (src >= n) | (dst < 0) | (dst >= n)
    if bad.any():
        first = arr[np.argmax(bad)]
        raise GraphError(
            f"Edge ({first[0]}, {first[1]}) has an endpoint outside [0, {n})"
        )
    loops = src == dst
    if loops.any():
        node = src[np.argmax(loops)]
        raise GraphError(f"Self-loop on node {node} is not allowed")

    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    canonical = lo * max(n, 1) + hi
    uniq, counts = np.unique(canonical, return_counts=True)
    if (counts > 1).any():
        dup = uniq[np.argmax(counts > 1)]
        raise GraphError(
            f"Duplicate edge ({dup // max(n, 1)}, {dup % max(n, 1)}) in edge list"
        )

    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]

    degree = np.bincount(rows, minlength=n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])
    data = 1.0 / degree[rows].astype(np.float64)

    matrix = sparse.csr_array((data, cols, indptr), shape=(n, n))
    matrix.has_sorted_indices = True
    _log.debug(f"Built graph with n={n} and {len(arr)} undirected edges")
    return SparseGraph(matrix)


def _check_rows(G: SparseGraph, M: npt.ArrayLike) -> FeatureMatrix:
    values = np.asarray(M, dtype=np.float64)
    if values.ndim not in (1, 2):
        raise GraphError(f"Expected a vector or matrix, got {values.ndim} dims")
    if values.shape[0] != G.n:
        raise GraphError(
            f"Row count {values.shape[0]} does not match graph size {G.n}"
        )
    return values


def aggregate(G: SparseGraph, M: npt.ArrayLike) -> FeatureMatrix:
    """Return ``G·M``: the neighbour-weighted mean of ``M`` for every node."""
    values = _check_rows(G, M)
    return np.asarray(G.matrix @ values, dtype=np.float64)


def second_order(G: SparseGraph, X: npt.ArrayLike) -> FeatureMatrix:
    """Return ``G·(G·X)`` without materializing ``G²``."""
    return aggregate(G, aggregate(G, X))


def ig_transform(G: SparseGraph, M: npt.ArrayLike) -> FeatureMatrix:
    """Return ``(I − G)·M``."""
    values = _check_rows(G, M)
    return values - aggregate(G, values)


def spectral_radius_upper_bound(
    G: SparseGraph, max_iter: int = 1000, tol: float = 1e-10
) -> float:
    """Estimate ``ρ(G)`` by power iteration.

    Iterates on the lazy operator ``(I + G)/2``: its dominant eigenvalue is
    ``(1 + ρ)/2`` for a non-negative ``G`` and it is aperiodic, so bipartite
    components (eigenvalue −1) do not make the iteration oscillate.
    """
    if G.n == 0:
        return 0.0
    x = np.ones(G.n, dtype=np.float64)
    previous = None
    estimate = 0.0
    for _ in range(max_iter):
        y = 0.5 * (x + G.matrix @ x)
        norm_y = float(np.max(np.abs(y)))
        estimate = norm_y / float(np.max(np.abs(x)))
        x = y / norm_y
        if previous is not None and abs(estimate - previous) <= tol * max(
            abs(estimate), 1e-300
        ):
            break
        previous = estimate
    return max(0.0, 2.0 * estimate - 1.0)


def remove_node_edges(G: SparseGraph, i: int) -> SparseGraph:
    """Return ``G₋ᵢ``: the graph with every edge incident to ``i`` removed."""
    edges = G.edges()
    keep = (edges[:, 0] != i) & (edges[:, 1] != i)
    return from_edge_list(edges[keep], G.n)


def parse_edge_lines(lines: Iterable[str]) -> list[tuple[int, int]]:
    """Parse whitespace-separated node pairs, skipping blanks and ``#`` comments."""
    pairs: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"Line {lineno}: expected two node ids, got {line!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise GraphError(
                f"Line {lineno}: node ids must be integers, got {line!r}"
            ) from exc
    return pairs
