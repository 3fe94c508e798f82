"""Discretization substrate: vertex selection, k-NN graph, Voronoi partition,
and the discrete Lipschitz constant of a labeling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components

from .data import LabeledDataset, kmeans, _pairwise_sq_dists
from .exceptions import DegenerateDatasetError, GraphDisconnectedError

__all__ = [
    "VertexSet",
    "Graph",
    "DatasetPartition",
    "select_vertices",
    "build_knn_graph",
    "partition_dataset",
    "graph_lipschitz",
]


@dataclass
class VertexSet:
    """n >= 2 pairwise-distinct embedding points, plus the seed that produced them."""

    points: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 2:
            raise ValueError("a vertex set needs at least 2 points")
        if np.unique(self.points, axis=0).shape[0] != self.points.shape[0]:
            raise ValueError("vertex points must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class Graph:
    """Undirected weighted connected graph over a :class:`VertexSet`.

    Edges are stored once with ``edge_index[e] = (i, j)``, ``i < j``; the
    adjacency treats them as symmetric. ``edge_lengths`` caches the embedding
    distance of each edge.
    """

    vertices: VertexSet
    edge_index: np.ndarray
    weights: np.ndarray
    edge_lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edge_index = np.asarray(self.edge_index, dtype=int).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        ei, ej = self.edge_index[:, 0], self.edge_index[:, 1]
        if (ei == ej).any():
            raise ValueError("self-loops are not allowed")
        if (ei >= ej).any():
            raise ValueError("edges must be stored canonically with i < j")
        if (self.weights <= 0).any():
            raise ValueError("edge weights must be positive")
        if self.edge_index.shape[0] != self.weights.shape[0]:
            raise ValueError("edge_index and weights length mismatch")
        pairs = {(int(i), int(j)) for i, j in self.edge_index}
        if len(pairs) != self.edge_index.shape[0]:
            raise ValueError("duplicate edges")
        diff = self.vertices.points[ei] - self.vertices.points[ej]
        self.edge_lengths = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if (self.edge_lengths == 0.0).any():
            raise ValueError("coincident vertex embeddings on an edge")
        labels = self.component_labels()
        if labels.max(initial=0) > 0:
            raise GraphDisconnectedError(labels)

    @property
    def n(self) -> int:
        return self.vertices.n

    @property
    def n_edges(self) -> int:
        return self.edge_index.shape[0]

    def component_labels(self) -> np.ndarray:
        adj = self.adjacency()
        _, labels = connected_components(adj, directed=False)
        return labels

    def adjacency(self) -> csr_matrix:
        ei, ej = self.edge_index[:, 0], self.edge_index[:, 1]
        n = self.n
        return coo_matrix(
            (np.concatenate([self.weights, self.weights]),
             (np.concatenate([ei, ej]), np.concatenate([ej, ei]))),
            shape=(n, n),
        ).tocsr()

    def neighbors(self, i: int) -> np.ndarray:
        ei, ej = self.edge_index[:, 0], self.edge_index[:, 1]
        return np.concatenate([ej[ei == i], ei[ej == i]])

    def incident_edges(self, i: int) -> np.ndarray:
        """Indices into edge_index of edges touching vertex i, in storage order."""
        ei, ej = self.edge_index[:, 0], self.edge_index[:, 1]
        return np.flatnonzero((ei == i) | (ej == i))


@dataclass
class DatasetPartition:
    """Voronoi assignment of samples to vertices with uniform weights 1/N."""

    assignment: np.ndarray
    n_vertices: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=int).ravel()
        if self.assignment.size < 1:
            raise ValueError("partition must cover at least one sample")
        if self.assignment.min() < 0 or self.assignment.max() >= self.n_vertices:
            raise ValueError("assignment refers to a vertex outside the set")

    @property
    def n_samples(self) -> int:
        return self.assignment.size

    @property
    def theta(self) -> float:
        """Per-sample weight; all samples carry 1/N."""
        return 1.0 / self.n_samples

    @property
    def total_mass(self) -> float:
        return self.theta * self.n_samples

    def cells(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.n_vertices + 1))
        return [order[bounds[i] : bounds[i + 1]] for i in range(self.n_vertices)]

    def cell_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_vertices)

    def label_sums(self, dataset: LabeledDataset) -> np.ndarray:
        """Per-vertex sum of labels over the cell, shape (n_vertices, dim_y)."""
        sums = np.zeros((self.n_vertices, dataset.dim_y))
        np.add.at(sums, self.assignment, dataset.y)
        return sums

    def cell_means(self, dataset: LabeledDataset) -> np.ndarray:
        """Per-vertex label means; empty cells fall back to the global mean."""
        counts = self.cell_counts()
        sums = self.label_sums(dataset)
        means = np.where(
            counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None],
            dataset.y.mean(axis=0)[None, :],
        )
        return means


def select_vertices(dataset: LabeledDataset, n: int, method: str = "iid",
                    seed: int = 0) -> VertexSet:
    """Pick n distinct discretization points from the dataset inputs.

    ``iid`` samples uniformly without replacement over the distinct inputs;
    ``kmeans`` runs Lloyd's algorithm on all inputs.
    """
    if not 2 <= n <= dataset.n:
        raise ValueError(f"n={n} must lie in [2, {dataset.n}]")
    if method == "iid":
        distinct = np.unique(dataset.x, axis=0)
        if distinct.shape[0] < n:
            raise DegenerateDatasetError(
                f"only {distinct.shape[0]} distinct inputs, cannot pick {n}"
            )
        idx = np.random.default_rng(seed).choice(distinct.shape[0], size=n, replace=False)
        return VertexSet(distinct[idx], seed=seed)
    if method == "kmeans":
        return VertexSet(kmeans(dataset.x, n, seed=seed), seed=seed)
    raise ValueError(f"unknown vertex selection method {method!r}")


def build_knn_graph(vertices: VertexSet, k: int, weighting: str = "unit",
                    bandwidth: float | None = None) -> Graph:
    """Symmetrized k-NN graph: edge (i,j) iff either endpoint ranks the other
    among its k nearest (Euclidean; ties by index).

    Unit weights by default. ``weighting="gaussian"`` applies
    exp(-|Xi-Xj|^2 / (2 s^2)) with s = ``bandwidth`` or the mean k-NN distance.
    Raises :class:`GraphDisconnectedError` when the union graph is disconnected.
    """
    n = vertices.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must lie in [1, {n - 1}]")
    d2 = _pairwise_sq_dists(vertices.points, vertices.points)
    np.fill_diagonal(d2, np.inf)
    # stable k smallest per row: argsort is deterministic (ties by index)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)

    if weighting == "unit":
        weights = np.ones(pairs.shape[0])
    elif weighting == "gaussian":
        lengths = np.sqrt(d2[pairs[:, 0], pairs[:, 1]])
        if bandwidth is None:
            bandwidth = float(np.sqrt(d2[np.arange(n), order[:, -1]]).mean())
        weights = np.exp(-(lengths**2) / (2.0 * bandwidth**2))
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    return Graph(vertices, pairs, weights)


def partition_dataset(vertices: VertexSet, dataset: LabeledDataset) -> DatasetPartition:
    """Assign each sample to its nearest vertex (ties to the lowest index)."""
    if vertices.dim != dataset.dim_x:
        raise ValueError(
            f"dimension mismatch: vertices are {vertices.dim}-d, samples {dataset.dim_x}-d"
        )
    d2 = _pairwise_sq_dists(dataset.x, vertices.points)
    return DatasetPartition(d2.argmin(axis=1), vertices.n)


def graph_lipschitz(graph: Graph, labeling: np.ndarray) -> float:
    """Largest edge ratio |v_i - v_j| / |X_i - X_j|; 0 for a constant labeling."""
    labeling = np.asarray(labeling, dtype=float)
    if labeling.ndim == 1:
        labeling = labeling[:, None]
    if labeling.shape[0] != graph.n:
        raise ValueError(
            f"labeling has {labeling.shape[0]} rows for a {graph.n}-vertex graph"
        )
    diff = labeling[graph.edge_index[:, 0]] - labeling[graph.edge_index[:, 1]]
    norms = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return float((norms / graph.edge_lengths).max())
