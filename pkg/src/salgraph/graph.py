"""Graphs over embedding-token grids.

The standard embedding carries 257 tokens: index 0 is the global summary
token, indices 1..256 are patch tokens laid out row-major on a 16x16 grid.
Edges encode spatial proximity (8-neighborhood on the patch grid), optional
semantic proximity (mutual-union cosine k-NN over token features), and
optionally a hub wiring from the global token to every patch token.

Graphs are immutable once built: edges are stored exactly once as (i, j)
with i < j in lexicographic order, so identical inputs always produce
identical edge arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_SIZE = 16
TOKEN_COUNT = GRID_SIZE * GRID_SIZE + 1


@dataclass(frozen=True)
class GraphConfig:
    use_semantic: bool = False
    k: int = 8
    connect_cls: bool = True


@dataclass
class TokenGraph:
    n_nodes: int
    edges: np.ndarray  # (E, 2) int64, i < j, lexicographically sorted
    _neighbors: tuple[np.ndarray, ...] = field(init=False, repr=False)
    _degrees: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        nbrs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self._neighbors = tuple(np.array(sorted(n), dtype=np.int64) for n in nbrs)
        self._degrees = np.array([len(n) for n in self._neighbors], dtype=np.int64)

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "TokenGraph":
        """Build from any iterable of (i, j) pairs; duplicates and orientation
        are normalized away, self-loops rejected."""
        seen = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) not allowed")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
            seen.add((min(i, j), max(i, j)))
        arr = np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)
        return cls(n_nodes=n_nodes, edges=arr)

    def neighbors(self, i: int) -> np.ndarray:
        return self._neighbors[i]

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency, no self-loops, float64."""
        if "adj" not in self._cache:
            a = np.zeros((self.n_nodes, self.n_nodes))
            if len(self.edges):
                a[self.edges[:, 0], self.edges[:, 1]] = 1.0
                a[self.edges[:, 1], self.edges[:, 0]] = 1.0
            self._cache["adj"] = a
        return self._cache["adj"]

    def normalized_adjacency(self) -> np.ndarray:
        """Symmetric degree-normalized operator with self-loops added:
        each entry of A+I is scaled by 1/sqrt((deg_i+1)(deg_j+1))."""
        if "norm_adj" not in self._cache:
            a = self.adjacency() + np.eye(self.n_nodes)
            d = 1.0 / np.sqrt(self._degrees + 1.0)
            self._cache["norm_adj"] = a * d[:, None] * d[None, :]
        return self._cache["norm_adj"]

    def mean_adjacency(self) -> np.ndarray:
        """Row-stochastic neighbor-mean operator (no self-loops); rows of
        isolated nodes are all zero, so their aggregated message is zero."""
        if "mean_adj" not in self._cache:
            a = self.adjacency().copy()
            deg = self._degrees.astype(np.float64)
            nz = deg > 0
            a[nz] /= deg[nz, None]
            self._cache["mean_adj"] = a
        return self._cache["mean_adj"]

    def neighbor_mask(self) -> np.ndarray:
        """Boolean attention support: neighbors plus self."""
        if "nbr_mask" not in self._cache:
            self._cache["nbr_mask"] = (self.adjacency() + np.eye(self.n_nodes)) > 0
        return self._cache["nbr_mask"]


def cosine_knn(features: np.ndarray, k: int) -> np.ndarray:
    """Top-k cosine neighbors per row, excluding self.

    Ties are broken toward the lower index. Returns an (n, k) int array.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n_rows, got k={k}, n={n}")
    norms = np.linalg.norm(features, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine_knn requires non-zero rows")
    unit = features / norms[:, None]
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)
    # stable sort on -sims keeps equal-similarity candidates in index order
    return np.argsort(-sims, axis=1, kind="stable")[:, :k]


def _grid_edge_pairs(grid: int, connect_cls: bool):
    for r in range(grid):
        for c in range(grid):
            i = 1 + r * grid + c
            # forward half of the 8-neighborhood covers each pair once
            for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < grid and 0 <= cc < grid:
                    yield i, 1 + rr * grid + cc
    if connect_cls:
        for i in range(1, grid * grid + 1):
            yield 0, i


def build_token_graph(
    embeddings: np.ndarray,
    config: GraphConfig = GraphConfig(),
    grid: int = GRID_SIZE,
) -> TokenGraph:
    """Build the token graph for one embedding tensor.

    ``embeddings`` must have grid*grid + 1 rows (global token first). Spatial
    8-neighborhood edges over the patch grid are always present; the global
    token is wired to every patch token when ``connect_cls``; mutual-union
    cosine k-NN edges over all token features are unioned in when
    ``use_semantic`` (an edge survives if either endpoint lists the other
    among its k nearest).
    """
    e = np.asarray(embeddings)
    n = grid * grid + 1
    if e.ndim != 2 or e.shape[0] != n:
        raise ValueError(f"expected {n} token rows for a {grid}x{grid} grid, got {e.shape}")
    if not np.isfinite(e).all():
        raise ValueError("embedding tensor contains non-finite values")
    pairs = set()
    for i, j in _grid_edge_pairs(grid, config.connect_cls):
        pairs.add((min(i, j), max(i, j)))
    if config.use_semantic:
        if config.k >= n - 1:
            raise ValueError(f"semantic k must be < {n - 1}, got {config.k}")
        knn = cosine_knn(e, config.k)
        for i in range(n):
            for j in knn[i]:
                pairs.add((min(i, int(j)), max(i, int(j))))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return TokenGraph(n_nodes=n, edges=edges)
