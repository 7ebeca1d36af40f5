"""Brute-force reference implementations shared by the unit and acceptance tests.

Everything here is deliberately naive (edge lists, explicit loops, closed
forms) and independent of the package's own code paths.
"""

import itertools

import numpy as np


def graph_strength(graph):
    out = np.zeros(graph.n_nodes)
    for h, k, weight in graph.edges:
        out[h] += weight
        out[k] += weight
    return out


def graph_degree(graph):
    out = np.zeros(graph.n_nodes, dtype=int)
    for h, k, _ in graph.edges:
        out[h] += 1
        out[k] += 1
    return out


def graph_clustering(graph):
    connected = {(h, k) for h, k, _ in graph.edges}
    connected |= {(k, h) for h, k in connected}
    out = np.zeros(graph.n_nodes)
    for v in range(graph.n_nodes):
        neighbours = [u for u in range(graph.n_nodes) if (v, u) in connected]
        if len(neighbours) < 2:
            continue
        triangles = sum(
            1 for a, b in itertools.combinations(neighbours, 2) if (a, b) in connected
        )
        out[v] = triangles / (len(neighbours) * (len(neighbours) - 1) / 2)
    return out


def graph_cpl_floyd_warshall(graph):
    n = graph.n_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for h, k, weight in graph.edges:
        dist[h, k] = dist[k, h] = 1.0 / weight
    for m in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i, m] + dist[m, j] < dist[i, j]:
                    dist[i, j] = dist[i, m] + dist[m, j]
    finite = dist[np.isfinite(dist) & ~np.eye(n, dtype=bool)]
    return finite.mean() if len(finite) else np.inf


def ema_closed_form(values, w):
    """sum_{p=2..t} a(1-a)^(t-p) f(p) + (1-a)^(t-1) f(1), a = 2/(w+1)."""
    a = 2.0 / (w + 1.0)
    out = np.empty(len(values))
    for t in range(1, len(values) + 1):
        total = (1.0 - a) ** (t - 1) * values[0]
        for p in range(2, t + 1):
            total += a * (1.0 - a) ** (t - p) * values[p - 1]
        out[t - 1] = total
    return out


def rolling_min_scan(values, p):
    return np.array(
        [min(values[max(0, t - p) : t + 1]) for t in range(len(values))]
    )
