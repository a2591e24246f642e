"""Weighted graphs, the path metric, balls/annuli and covering algorithms.

A graph is a symmetric weight matrix mu_xy >= 0; the vertex measure is
m(x) = sum_y mu_xy (a self loop counts once).  Every L^p quantity in the
package is weighted by m.  Balls use the strict convention
B(x, r) = {y : d(x, y) < r}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DisconnectedGraph, NegativeWeight, ZeroMeasureVertex

# Above this vertex count geometry_report switches from exhaustive
# enumeration to sampling.
N_EXHAUSTIVE = 2000


class WeightedGraph:
    """Connected weighted graph with cached metric structure.

    Parameters
    ----------
    adjacency:
        Symmetric nonnegative sparse matrix of edge weights mu_xy.
        Diagonal entries are self loops.
    labels:
        Optional original vertex ids (for file round trips).
    meta:
        Optional generator metadata (used by the CLI to resolve
        coordinates on structured fixtures).
    """

    def __init__(self, adjacency, labels=None, meta=None):
        A = sp.csr_matrix(adjacency, dtype=float)
        A.eliminate_zeros()
        A.sum_duplicates()
        A.sort_indices()
        if A.shape[0] != A.shape[1]:
            raise ValueError("adjacency must be square")
        if (A != A.T).nnz != 0:
            raise ValueError("adjacency must be symmetric")
        if A.nnz and A.data.min() < 0:
            raise NegativeWeight("negative edge weight")
        self.n = A.shape[0]
        self.adjacency = A
        self.m = np.asarray(A.sum(axis=1)).ravel()
        if np.any(self.m <= 0):
            bad = int(np.where(self.m <= 0)[0][0])
            raise ZeroMeasureVertex(f"vertex {bad} has m(x) = 0")
        ncomp, _ = connected_components(A, directed=False)
        if ncomp != 1:
            raise DisconnectedGraph(f"{ncomp} connected components")
        self.labels = np.arange(self.n) if labels is None else np.asarray(labels)
        self.meta = dict(meta or {})
        # degree counts every neighbour with mu_xy > 0, the vertex itself
        # included when it carries a loop
        self.degrees = np.diff(A.indptr)
        self.max_degree = int(self.degrees.max())
        self._dist = None
        self._rev_edges = None
        self._oracle = None
        self._geometry = None
        self._markov = None

    # -- metric -------------------------------------------------------

    @property
    def dist(self):
        """Dense all-pairs shortest-path matrix (unit edge lengths)."""
        if self._dist is None:
            d = shortest_path(self.adjacency, method="D", unweighted=True)
            self._dist = d
        return self._dist

    @property
    def diameter(self):
        return int(self.dist.max())

    def total_volume(self):
        return float(self.m.sum())

    def volume(self, mask):
        return float(self.m[mask].sum())

    # -- directed-edge bookkeeping (used by 1-forms) --------------------

    @property
    def rev_edges(self):
        """Permutation sending the CSR slot of (x, y) to the slot of (y, x)."""
        if self._rev_edges is None:
            A = self.adjacency
            coo = A.tocoo()
            order = np.lexsort((coo.col, coo.row))
            assert np.all(order == np.arange(A.nnz))
            rev_order = np.lexsort((coo.row, coo.col))
            self._rev_edges = rev_order
        return self._rev_edges

    @property
    def edge_rows(self):
        if getattr(self, "_edge_rows", None) is None:
            self._edge_rows = np.repeat(
                np.arange(self.n), np.diff(self.adjacency.indptr)
            )
        return self._edge_rows

    @property
    def edge_cols(self):
        return self.adjacency.indices

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={self.adjacency.nnz})"


def build_graph(edges, meta=None) -> WeightedGraph:
    """Build a connected graph from (x, y, mu) triples.

    Each undirected pair may be supplied once or consistently twice;
    conflicting duplicates are rejected.  Vertex ids are arbitrary
    nonnegative integers and are compacted internally.
    """
    seen = {}
    for x, y, mu in edges:
        if mu < 0:
            raise NegativeWeight(f"edge ({x},{y}) weight {mu} < 0")
        key = (x, y) if x <= y else (y, x)
        if key in seen and not np.isclose(seen[key], mu, rtol=0, atol=0):
            raise ValueError(f"inconsistent duplicate weight for edge {key}")
        seen[key] = float(mu)
    ids = sorted({v for key in seen for v in key})
    index = {v: i for i, v in enumerate(ids)}
    n = len(ids)
    rows, cols, vals = [], [], []
    for (x, y), mu in seen.items():
        if mu == 0.0:
            continue
        i, j = index[x], index[y]
        rows.append(i)
        cols.append(j)
        vals.append(mu)
        if i != j:
            rows.append(j)
            cols.append(i)
            vals.append(mu)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return WeightedGraph(A, labels=np.array(ids), meta=meta)


# -- graph file I/O ----------------------------------------------------

def read_graph(path) -> WeightedGraph:
    """Read `x y mu` lines (# comments allowed) or the JSON variant."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        edges = [(int(x), int(y), float(mu)) for x, y, mu in payload["edges"]]
        return build_graph(edges)
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, y, mu = line.split()
        edges.append((int(x), int(y), float(mu)))
    return build_graph(edges)


def write_graph(g: WeightedGraph, path, fmt="text"):
    coo = sp.triu(g.adjacency).tocoo()
    triples = [
        (int(g.labels[i]), int(g.labels[j]), float(v))
        for i, j, v in zip(coo.row, coo.col, coo.data)
    ]
    with open(path, "w", encoding="utf-8") as fh:
        if fmt == "json":
            json.dump({"edges": [[x, y, mu] for x, y, mu in triples]}, fh)
        else:
            fh.write("# x y mu\n")
            for x, y, mu in triples:
                fh.write(f"{x} {y} {mu}\n")


# -- balls and annuli --------------------------------------------------

@dataclass
class Ball:
    """Strict ball B(x, r) = {y : d(x, y) < r} with its measure."""

    graph: WeightedGraph
    center: int
    radius: float
    mask: np.ndarray = field(repr=False)
    volume: float

    @property
    def members(self):
        return np.where(self.mask)[0]

    def scaled(self, lam) -> "Ball":
        return ball(self.graph, self.center, lam * self.radius)

    def __contains__(self, vertex):
        return bool(self.mask[vertex])


def ball(g: WeightedGraph, x: int, r) -> Ball:
    if r < 1:
        raise ValueError("ball radius must be >= 1")
    mask = g.dist[x] < r
    return Ball(g, x, r, mask, g.volume(mask))


@dataclass
class Annulus:
    """C_j(B) = 2^{j+1} B \\ 2^j B for j >= 2, and C_1(B) = 4B."""

    base: Ball
    j: int
    mask: np.ndarray = field(repr=False)

    @property
    def members(self):
        return np.where(self.mask)[0]

    @property
    def volume(self):
        return self.base.graph.volume(self.mask)


def annulus(b: Ball, j: int) -> Annulus:
    if j < 1:
        raise ValueError("annulus index must be >= 1")
    if j == 1:
        mask = b.scaled(4).mask
    else:
        mask = b.scaled(2 ** (j + 1)).mask & ~b.scaled(2 ** j).mask
    return Annulus(b, j, mask)


def annuli(b: Ball, j_max: int):
    return [annulus(b, j) for j in range(1, j_max + 1)]


def annuli_covering_range(b: Ball):
    """All annuli up to the first index where 2^{j+1} B saturates."""
    out = []
    j = 1
    while True:
        out.append(annulus(b, j))
        if 2 ** (j + 1) * b.radius > b.graph.diameter:
            break
        j += 1
    return out


# -- covering algorithms -----------------------------------------------

def vitali_cover(g: WeightedGraph, b: Ball, alpha) -> list:
    """Greedy maximal family of disjoint radius-r balls inside alpha*B.

    Scanning centers in ascending vertex order guarantees maximality,
    hence the tripled balls cover alpha*B.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    r = b.radius
    big = b.scaled(alpha)
    taken = np.zeros(g.n, dtype=bool)
    out = []
    for x in range(g.n):
        cand = g.dist[x] < r
        if not np.all(big.mask[cand]):
            continue
        if np.any(taken & cand):
            continue
        taken |= cand
        out.append(Ball(g, x, r, cand, g.volume(cand)))
    return out


def annulus_cover(g: WeightedGraph, b: Ball, j: int) -> list:
    """Bounded-overlap covering of C_j(B) by balls of radius r.

    For r in {1, 2} the balls centered on C_j(B) already work; for
    larger r the centers come from a Vitali family at scale ~ r/3.
    """
    if j < 1:
        raise ValueError("annulus index must be >= 1")
    r = int(b.radius)
    ring = annulus(b, j)
    if not ring.mask.any():
        return []
    if r <= 2:
        return [ball(g, int(x), r) for x in ring.members]
    s = r // 3
    seed = ball(g, b.center, s)
    family = vitali_cover(g, seed, (2 ** (j + 1) * r) / s)
    out = []
    for small in family:
        tripled = g.dist[small.center] < 3 * s
        if np.any(tripled & ring.mask):
            out.append(ball(g, small.center, r))
    return out


def cover_overlap_bound(g: WeightedGraph, r: int, doubling_constant: float) -> float:
    """Multiplicity bound checked against annulus_cover output.

    Radius <= 2 balls are controlled by the degree bound; larger radii
    by five doublings (disjoint seed balls at scale r/3 inside B(x, 2r)).
    """
    if r <= 2:
        M0 = g.max_degree
        return 1 + M0 * M0
    return doubling_constant ** 5


# -- geometry diagnostics ----------------------------------------------

@dataclass
class GeometryReport:
    doubling_constant: float
    d0_estimate: float
    eps_LB: float
    M0: int
    n: int
    diameter: int
    enumeration_policy: str

    def to_json(self):
        return json.dumps(
            {
                "doubling_constant": self.doubling_constant,
                "d0_estimate": self.d0_estimate,
                "eps_LB": self.eps_LB,
                "M0": self.M0,
                "n": self.n,
                "diameter": self.diameter,
                "enumeration_policy": self.enumeration_policy,
            },
            indent=2,
        )


def cached_geometry(g: WeightedGraph) -> "GeometryReport":
    if g._geometry is None:
        g._geometry = geometry_report(g)
    return g._geometry


def geometry_report(g: WeightedGraph, p_diag=None, n_exhaustive=N_EXHAUSTIVE,
                    sample_size=256, seed=0) -> GeometryReport:
    """Measure the volume-doubling constant, growth exponent and the
    walk's diagonal lower bound.

    The doubling constant is sup over (x, r) of V(x, 2r)/V(x, r); the
    exponent is an OLS fit of log mean-ratio against log lambda for
    lambda in {2, 4, 8} over all feasible (x, r) with lambda * r <= diam.
    `p_diag` supplies p(x, x); by default mu_xx / m(x)^2.
    """
    if p_diag is None:
        diag = g.adjacency.diagonal()
        p_xx = diag / (g.m * g.m)
    else:
        p_xx = np.array([p_diag(x) for x in range(g.n)])
    eps_lb = float(np.min(p_xx * g.m))

    if g.n <= n_exhaustive:
        centers = np.arange(g.n)
        policy = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        centers = rng.choice(g.n, size=min(sample_size, g.n), replace=False)
        policy = f"sampled({len(centers)})"

    diam = g.diameter
    D = g.dist[centers]
    radii = np.arange(1, max(diam, 1) + 2)
    # V[c, r-1] = volume of B(centers[c], r); last column saturates at Gamma
    vols = np.empty((len(centers), len(radii)))
    for k, r in enumerate(radii):
        vols[:, k] = (D < r) @ g.m
    doubling = 1.0
    for r in range(1, max(diam, 1) + 1):
        ratio = vols[:, min(2 * r, len(radii)) - 1] / vols[:, r - 1]
        doubling = max(doubling, float(ratio.max()))

    lams, logs = [], []
    for lam in (2, 4, 8):
        # radius 1 balls are single vertices and badly bias the growth fit
        feasible = [r for r in radii if lam * r <= diam and r >= 2]
        if not feasible:
            continue
        ratios = [vols[:, lam * r - 1] / vols[:, r - 1] for r in feasible]
        lams.append(np.log(lam))
        logs.append(np.log(np.mean(np.concatenate(ratios))))
    if len(lams) >= 2:
        slope = np.polyfit(lams, logs, 1)[0]
        d0 = float(max(slope, 0.0))
    elif len(lams) == 1:
        d0 = float(max(logs[0] / lams[0], 0.0))
    else:
        d0 = 0.0

    return GeometryReport(
        doubling_constant=doubling,
        d0_estimate=d0,
        eps_LB=eps_lb,
        M0=g.max_degree,
        n=g.n,
        diameter=diam,
        enumeration_policy=policy,
    )
