"""Interaction graph over channels and its connectivity measures.

Nodes are channels; an edge (h, k) exists when the synchronization value
w[h, k] exceeds the chosen threshold.  Strength and degree are per-node sums
and counts; the clustering coefficient is the binary triangle fraction on the
thresholded graph; path lengths use 1/w as edge length so stronger
synchronization means shorter distance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .sync import SyncMatrix


@dataclass
class InteractionGraph:
    labels: list[str]
    adjacency: np.ndarray  # (C, C) symmetric; 0 where no edge, no self-loops
    edge_threshold: float

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        out = []
        for h in range(self.n_nodes):
            for k in range(h + 1, self.n_nodes):
                if self.adjacency[h, k] > 0:
                    out.append((h, k, float(self.adjacency[h, k])))
        return out


def build_graph(matrix: SyncMatrix | np.ndarray, edge_threshold: float = 0.0,
                labels: list[str] | None = None) -> InteractionGraph:
    """Keep exactly the edges with weight strictly above the threshold."""
    if not 0 <= edge_threshold < 1:
        raise ValueError(f"edge threshold must be in [0, 1), got {edge_threshold}")
    if isinstance(matrix, SyncMatrix):
        w, labels = matrix.w, list(matrix.labels)
    else:
        w = np.asarray(matrix, dtype=np.float64)
        labels = list(labels) if labels is not None else [str(i) for i in range(len(w))]
    adj = np.where(w > edge_threshold, w, 0.0)
    np.fill_diagonal(adj, 0.0)
    return InteractionGraph(labels=labels, adjacency=adj, edge_threshold=edge_threshold)


def node_strength(graph: InteractionGraph) -> np.ndarray:
    """Sum of the weights of the edges connected to each node (0 if isolated)."""
    return graph.adjacency.sum(axis=1)


def node_degree(graph: InteractionGraph) -> np.ndarray:
    """Number of edges connected to each node."""
    return (graph.adjacency > 0).sum(axis=1)


def clustering_coefficient(graph: InteractionGraph) -> np.ndarray:
    """Fraction of triangles around each node, binary on the thresholded edges."""
    a = (graph.adjacency > 0).astype(np.float64)
    triangles = np.diag(a @ a @ a) / 2.0
    degree = a.sum(axis=1)
    out = np.zeros(graph.n_nodes)
    mask = degree >= 2
    out[mask] = 2.0 * triangles[mask] / (degree[mask] * (degree[mask] - 1.0))
    return out


def characteristic_path_length(graph: InteractionGraph) -> float:
    """Mean shortest-path length (edge length 1/w) over reachable ordered pairs.

    Returns +inf when no pair of distinct nodes is connected.
    """
    if graph.n_nodes < 2:
        return np.inf
    with np.errstate(divide="ignore"):
        lengths = np.where(graph.adjacency > 0, 1.0 / graph.adjacency, 0.0)
    dist = shortest_path(lengths, method="D", directed=False)
    off_diag = ~np.eye(graph.n_nodes, dtype=bool)
    reachable = np.isfinite(dist) & off_diag
    if not reachable.any():
        return np.inf
    return float(dist[reachable].mean())


def write_graph_csv(graphs: list[tuple[int, InteractionGraph]], path) -> None:
    """Dump edges for debugging/plots: window_index,h,k,weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_index", "h", "k", "weight"])
        for window_index, graph in graphs:
            for h, k, weight in graph.edges:
                writer.writerow(
                    [window_index, graph.labels[h], graph.labels[k], repr(weight)]
                )
