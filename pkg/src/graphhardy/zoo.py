"""Deterministic fixture graphs.

Every generator adds self loops so the walk satisfies the diagonal
lower bound p(x, x) m(x) >= eps > 0.  By default the loop weight at a
vertex equals its total non-loop weight, which pins eps at 1/2 across
the zoo regardless of degree.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graphs import WeightedGraph, build_graph


def _with_loops(edges, n, loop_weight):
    """Append self loops; loop_weight=None means per-vertex degree sum."""
    if loop_weight is None:
        tot = np.zeros(n)
        for x, y, mu in edges:
            tot[x] += mu
            if x != y:
                tot[y] += mu
        loops = [(i, i, float(tot[i])) for i in range(n)]
    else:
        loops = [(i, i, float(loop_weight)) for i in range(n)]
    return edges + loops


def k2l() -> WeightedGraph:
    """Two vertices, unit edge, unit loops: m = 2 on both vertices."""
    return build_graph([(0, 0, 1.0), (1, 1, 1.0), (0, 1, 1.0)],
                       meta={"kind": "k2l"})


def lazy_cycle(n: int, loop_weight=2.0) -> WeightedGraph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    edges = _with_loops(edges, n, loop_weight)
    return build_graph(edges, meta={"kind": "lazy_cycle", "n": n})


def lazy_path(n: int, loop_weight=None) -> WeightedGraph:
    if n < 3:
        raise ValueError("path needs n >= 3")
    edges = [(i, i + 1, 1.0) for i in range(n - 1)]
    edges = _with_loops(edges, n, loop_weight)
    return build_graph(edges, meta={"kind": "lazy_path", "n": n})


def lazy_torus_2d(n: int, loop_weight=4.0) -> WeightedGraph:
    """n x n discrete torus, unit edges, vertex (i, j) -> id i*n + j."""
    if n < 3:
        raise ValueError("torus needs n >= 3")
    edges = []
    for i in range(n):
        for j in range(n):
            v = i * n + j
            edges.append((v, i * n + (j + 1) % n, 1.0))
            edges.append((v, ((i + 1) % n) * n + j, 1.0))
    edges = _with_loops(edges, n * n, loop_weight)
    return build_graph(edges, meta={"kind": "lazy_torus_2d", "n": n})


def binary_tree(depth: int, loop_weight=1.0) -> WeightedGraph:
    """Complete binary tree; exponential volume growth, so a negative
    fixture for the doubling property."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = 2 ** (depth + 1) - 1
    edges = []
    for v in range(1, n):
        edges.append(((v - 1) // 2, v, 1.0))
    edges = _with_loops(edges, n, loop_weight)
    return build_graph(edges, meta={"kind": "binary_tree", "depth": depth})


def random_weights(base: WeightedGraph, seed: int, spread=(0.5, 1.5)) -> WeightedGraph:
    """Jitter the weights of `base` with a seeded multiplicative factor."""
    lo, hi = spread
    rng = np.random.default_rng(seed)
    upper = sp.triu(base.adjacency).tocoo()
    factors = rng.uniform(lo, hi, size=upper.nnz)
    edges = [
        (int(i), int(j), float(v * f))
        for i, j, v, f in zip(upper.row, upper.col, upper.data, factors)
    ]
    meta = dict(base.meta)
    meta["jitter_seed"] = seed
    return build_graph(edges, meta=meta)


def by_name(name: str) -> WeightedGraph:
    """Resolve CLI fixture names like `lazy_cycle_16` or `k2l`."""
    if name == "k2l":
        return k2l()
    for prefix, fn in (
        ("lazy_cycle_", lazy_cycle),
        ("lazy_torus_", lazy_torus_2d),
        ("lazy_path_", lazy_path),
        ("binary_tree_", binary_tree),
    ):
        if name.startswith(prefix):
            return fn(int(name[len(prefix):]))
    raise ValueError(f"unknown fixture name: {name!r}")
