"""Discrete tent spaces: T^1_2 atoms, the stopping-time atomic
decomposition, and the synthesis operator mapping tent atoms back to
vertex functions.

The decomposition is the standard one over dyadic level sets of the
tent functional; tie-breaking is frozen (levels bottom-up, Whitney
centers largest-ball-first then ascending vertex index) so runs are
reproducible.  Every emitted atom satisfies the support and size
conditions exactly, and the pieces partition the support of F, so the
reconstruction residual is at rounding level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import delta_power, delta_power_exact, has_oracle, spectral
from .errors import NonConvergent
from .graphs import Ball, WeightedGraph, ball
from .operators import apply_P, markov_matrix
from .quadratic import SpaceTimeFunction, tent_functional


def tent_mask(g: WeightedGraph, set_mask: np.ndarray, l_max: int) -> np.ndarray:
    """(y, k) membership of the tent over a vertex set O,
    d(y, O^c)^2 > k, with d(y, emptyset) = +inf."""
    comp = ~set_mask
    if not comp.any():
        return np.ones((g.n, l_max + 1), dtype=bool)
    d_out = g.dist[:, comp].min(axis=1)
    k = np.arange(l_max + 1)
    return (d_out[:, None] ** 2) > k[None, :]


def tent(b: Ball, l_max: int) -> np.ndarray:
    return tent_mask(b.graph, b.mask, l_max)


@dataclass
class TentAtom:
    """Space-time function supported in the tent of `ball` with
    ||A||_{T^2_2}^2 <= 1/V(ball)."""

    ball: Ball
    values: SpaceTimeFunction = field(repr=False)
    t22_norm: float

    def validate(self, norm_tol=1e-12):
        g = self.ball.graph
        inside = tent(self.ball, self.values.l_max)
        support_ok = not np.any((self.values.values != 0.0) & ~inside)
        norm = self.values.t22_norm()
        norm_ok = norm ** 2 <= (1.0 + norm_tol) / self.ball.volume
        return support_ok and norm_ok


@dataclass
class TentDecomposition:
    coefficients: list  # (lambda_i, TentAtom)
    residual_t22: float
    sum_abs_lambda: float

    def to_json(self):
        return json.dumps(
            {
                "atoms": [
                    {
                        "lambda": lam,
                        "center": int(atom.ball.center),
                        "radius": float(atom.ball.radius),
                        "t22_norm": atom.t22_norm,
                    }
                    for lam, atom in self.coefficients
                ],
                "residual_t22": self.residual_t22,
                "sum_abs_lambda": self.sum_abs_lambda,
            },
            indent=2,
        )


def _whitney_balls(g: WeightedGraph, level_mask: np.ndarray):
    """Greedy ball cover of a proper subset: centers taken
    largest-distance-to-complement first, ties by vertex index."""
    comp = ~level_mask
    rho = g.dist[:, comp].min(axis=1)
    verts = np.where(level_mask)[0]
    order = verts[np.lexsort((verts, -rho[verts]))]
    covered = np.zeros(g.n, dtype=bool)
    centers, radii = [], []
    for x in order:
        if covered[x]:
            continue
        centers.append(int(x))
        radii.append(float(rho[x]))
        covered |= g.dist[x] < rho[x]
    return centers, radii


def atomic_decompose(g: WeightedGraph, F: SpaceTimeFunction,
                     tol=1e-8) -> TentDecomposition:
    """Stopping-time atomic decomposition of F in T^1_2.

    Level sets O_k = {A F > 2^k} carve the support of F into tent
    differences; each slab is split along a Whitney cover of O_k and
    each piece is normalized into a T^1_2 atom.
    """
    vals = F.values
    l_max = F.l_max
    AF = tent_functional(g, F)
    if not np.any(vals != 0.0):
        return TentDecomposition([], 0.0, 0.0)
    pos = AF[AF > 0]
    k_lo = math.floor(math.log2(pos.min())) - 1
    k_hi = math.ceil(math.log2(AF.max()))
    coefficients = []
    reconstruction = np.zeros_like(vals)
    level_masks = {}
    for k in range(k_lo, k_hi + 1):
        level_masks[k] = AF > 2.0 ** k
    tents = {k: tent_mask(g, level_masks[k], l_max) for k in level_masks}
    empty = np.zeros((g.n, l_max + 1), dtype=bool)
    for k in range(k_lo, k_hi + 1):
        upper = tents.get(k + 1, empty)
        slab = tents[k] & ~upper & (vals != 0.0)
        if not slab.any():
            continue
        O = level_masks[k]
        if O.all():
            centers = [0]
            radii = [float(g.diameter + 1)]
            assign_of = np.zeros(g.n, dtype=int)
        else:
            centers, radii = _whitney_balls(g, O)
            assign_of = np.full(g.n, -1, dtype=int)
            # first selected ball containing the vertex
            for i in reversed(range(len(centers))):
                assign_of[g.dist[centers[i]] < radii[i]] = i
        slab_y, slab_l = np.nonzero(slab)
        owner = assign_of[slab_y]
        for i in range(len(centers)):
            sel = owner == i
            if not sel.any():
                continue
            ys, ls = slab_y[sel], slab_l[sel]
            # radius large enough that every assigned (y, l) sits in the tent
            reach = g.dist[centers[i], ys] + np.floor(np.sqrt(ls)) + 1.0
            R = float(max(radii[i], reach.max()))
            atom_ball = ball(g, centers[i], R)
            piece = np.zeros_like(vals)
            piece[ys, ls] = vals[ys, ls]
            stf = SpaceTimeFunction(g, piece)
            t22 = stf.t22_norm()
            if t22 == 0.0:
                continue
            lam = t22 * math.sqrt(atom_ball.volume)
            atom = TentAtom(atom_ball, SpaceTimeFunction(g, piece / lam),
                            1.0 / math.sqrt(atom_ball.volume))
            coefficients.append((lam, atom))
            reconstruction += piece
    residual = SpaceTimeFunction(g, vals - reconstruction).t22_norm()
    if residual > tol:
        raise NonConvergent(
            f"tent decomposition residual {residual:.3e} above tol {tol:.3e}"
        )
    sum_abs = float(sum(abs(lam) for lam, _ in coefficients))
    return TentDecomposition(coefficients, float(residual), sum_abs)


# -- synthesis ----------------------------------------------------------------

def eta_coefficients(eta: int, count: int) -> np.ndarray:
    """c_l for l = 1..count with sum_l c_l z^{l-1} = (1-z)^{-eta}."""
    out = np.empty(count)
    out[0] = 1.0
    for l in range(1, count):
        out[l] = out[l - 1] * (l + eta - 1) / l
    return out


def pi_synthesis(g: WeightedGraph, F: SpaceTimeFunction, eta: int,
                 beta: float, tol=1e-10) -> np.ndarray:
    """Synthesis sum_{l>=1} (c_l^eta / l^beta)
    Delta^{eta-beta} (I+P)^eta P^{l-1} F(., l-1).

    The prefix operator is applied per level so partial sums stay at
    the scale of the result (the raw sum is badly conditioned).
    """
    if eta < beta:
        raise ValueError("eta must be >= beta")
    vals = F.values
    count = vals.shape[1]
    c = eta_coefficients(eta, count)
    exp = eta - beta
    integer_exp = float(exp).is_integer()

    def prefix(v):
        for _ in range(eta):
            v = v + apply_P(g, v)
        if integer_exp:
            for _ in range(int(exp)):
                v = v - apply_P(g, v)
        elif has_oracle(g):
            v = delta_power_exact(g, v, exp)
        else:
            v = delta_power(g, v, exp, tol)
        return v

    W = markov_matrix(g)
    acc = np.zeros(g.n)
    for l in range(count, 0, -1):
        acc = W @ acc + (c[l - 1] / float(l) ** beta) * prefix(vals[:, l - 1])
    return acc


def reproducing_l_max(g: WeightedGraph, eta: int, tol: float,
                      n_cap=200000) -> int:
    """Horizon L with || sum_{k<=L} c_{k+1} (I-P^2)^eta P^{2k} f - f ||
    <= tol ||f|| on the mean-zero subspace (computed spectrally)."""
    lams = spectral(g).eigenvalues[:-1]
    z = lams * lams
    front = (1.0 - z) ** eta
    partial = np.zeros_like(z)
    c = 1.0
    zpow = np.ones_like(z)
    for k in range(n_cap):
        partial += c * zpow
        err = np.abs(1.0 - front * partial).max()
        if err <= tol:
            return k
        c = c * (k + eta) / (k + 1)
        zpow *= z
    raise NonConvergent(f"reproducing horizon beyond {n_cap}")
