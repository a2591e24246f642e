"""Molecules, molecular Hardy decompositions, BMO norms and the
duality pairing.

A molecule is an L^2 function factored through a cancellative operator
applied to a pre-image b whose mass decays across the annuli of a ball
of radius sqrt(s):

* bz1:  a = (I - P^{s_1}) ... (I - P^{s_M}) b,  s_i in [s, 2s]
* bz2:  a = [I - (I + s Delta)^{-1}]^M b
* form: a = s^{M+1/2} d Delta^M (I + s Delta)^{-M-1/2} b   (a 1-form)

with ||b||_{L^2(C_j(B))} <= 2^{-j eps} V(2^j B)^{-1/2} for every ring,
and the atom case (eps = inf) replaced by supp b in B together with
||b||_2 <= V(B)^{-1/2}.

The decomposition pipeline goes: heat profile of f -> tent atomic
decomposition -> one synthesized molecule per tent atom.  Synthesized
molecules are valid only up to a uniform constant, so each one is
normalized by its measured annulus excess and the constant is kept on
the coefficient.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import (
    delta_inv_sqrt_exact,
    delta_inverse_exact,
    delta_power,
    delta_power_exact,
    has_oracle,
    require_mean_zero,
    resolvent_apply,
    resolvent_exact,
)
from .errors import (
    FactorizationMismatch,
    NonConvergent,
    NotExactForm,
    SizeBoundViolated,
    ValidationFailed,
)
from .graphs import Ball, WeightedGraph, annulus, ball, cached_geometry
from .operators import (
    EdgeFunction,
    apply_P,
    differential,
    divergence,
    inner,
    lp_norm,
    lp_norm_forms,
    markov_matrix,
    mean_project,
    tx_norms,
)
from .quadratic import SpaceTimeFunction, default_l_max, quad_norm
from .tentspace import (
    TentAtom,
    atomic_decompose,
    eta_coefficients,
    reproducing_l_max,
)


# -- molecule type -------------------------------------------------------

@dataclass
class Molecule:
    kind: str                  # "bz1" | "bz2" | "bz2_tuple" | "form"
    M: int
    eps: float                 # math.inf marks an atom
    s: int
    ball: Ball
    b: np.ndarray = field(repr=False)
    a: object = field(repr=False)   # np.ndarray or EdgeFunction
    times: tuple = None        # bz1 / bz2_tuple only
    norm_constant: float = 1.0

    @property
    def graph(self) -> WeightedGraph:
        return self.ball.graph


@dataclass
class ValidationReport:
    ok: bool
    factorization_error: float
    size_violations: list
    atom_tuple_warning: bool
    l1_norm: float
    annulus_profile: list
    a_annulus_excess: float


def _molecule_rings(mol: Molecule):
    out = []
    j = 1
    while True:
        out.append((j, annulus(mol.ball, j)))
        if 2 ** (j + 1) * mol.ball.radius > mol.graph.diameter:
            break
        j += 1
    return out


def _restricted_l2(g, f, mask):
    return math.sqrt(float(np.sum(f[mask] ** 2 * g.m[mask]))) if mask.any() else 0.0


def rederive_molecule(mol: Molecule):
    """Recompute a from b along the kind-specific factorization."""
    g = mol.graph
    if mol.kind == "bz1":
        # applied directly: atom tuples may sit below s, which the
        # strict BZ1Kind constructor would reject
        out = np.asarray(mol.b, dtype=float)
        for t in mol.times:
            out = out - apply_P(g, out, t)
        return out
    if mol.kind == "bz2":
        out = np.asarray(mol.b, dtype=float)
        for _ in range(mol.M):
            out = out - resolvent_apply(g, out, mol.s, 1.0)
        return out
    if mol.kind == "bz2_tuple":
        # variant normalization: product of single resolvent differences
        out = np.asarray(mol.b, dtype=float)
        for t in mol.times:
            out = out - resolvent_apply(g, out, t, 1.0)
        return out
    if mol.kind == "form":
        v = np.asarray(mol.b, dtype=float)
        for _ in range(mol.M):
            v = v - apply_P(g, v)
        v = resolvent_apply(g, v, mol.s, mol.M + 0.5)
        return differential(g, mol.s ** (mol.M + 0.5) * v)
    raise ValueError(f"unknown molecule kind {mol.kind!r}")


def validate_molecule(mol: Molecule, fact_tol=1e-9, size_tol=1e-9,
                      raise_on_fail=True) -> ValidationReport:
    """Check factorization, annulus size bounds and measure the L^1 mass.

    bz1 atoms are accepted with tuple entries anywhere in [1, 2s]
    (flagged), molecules need entries in [s, 2s].
    """
    g = mol.graph
    is_form = mol.kind == "form"
    a_ref = mol.a
    a2 = rederive_molecule(mol)
    if is_form:
        scale = max(1.0, lp_norm_forms(g, a_ref, 2))
        fact_err = lp_norm_forms(g, a2 - a_ref, 2) / scale
    else:
        scale = max(1.0, lp_norm(g, a_ref, 2))
        fact_err = lp_norm(g, np.asarray(a2) - np.asarray(a_ref), 2) / scale
    if fact_err > fact_tol and raise_on_fail:
        raise FactorizationMismatch(
            f"relative factorization error {fact_err:.3e} > {fact_tol:.1e}"
        )

    tuple_warning = False
    if mol.kind in ("bz1", "bz2_tuple"):
        # the atom tuple range is accepted down to 1, with a flag
        lo = 1 if math.isinf(mol.eps) else mol.s
        for t in mol.times:
            if not lo <= t <= 2 * mol.s:
                raise ValidationFailed(
                    f"{mol.kind} tuple entry {t} outside [[{lo}, {2 * mol.s}]]"
                )
            if t < mol.s:
                tuple_warning = True

    violations = []
    profile = []
    if math.isinf(mol.eps):
        outside = ~mol.ball.mask
        stray = float(np.abs(np.asarray(mol.b)[outside]).max(initial=0.0))
        norm_b = lp_norm(g, mol.b, 2)
        bound = mol.ball.volume ** -0.5
        profile.append(norm_b)
        if stray > 0.0:
            violations.append((0, stray, 0.0))
        if norm_b > bound * (1.0 + size_tol):
            violations.append((1, norm_b, bound))
    else:
        for j, ring in _molecule_rings(mol):
            measured = _restricted_l2(g, np.asarray(mol.b), ring.mask)
            bound = 2.0 ** (-j * mol.eps) * mol.ball.scaled(2 ** j).volume ** -0.5
            profile.append(measured)
            if measured > bound * (1.0 + size_tol):
                violations.append((j, measured, bound))
    if violations and raise_on_fail:
        j, measured, bound = violations[0]
        raise SizeBoundViolated(j, measured, bound)

    if is_form:
        l1 = lp_norm_forms(g, a_ref, 1)
        level = tx_norms(g, a_ref)
    else:
        l1 = lp_norm(g, a_ref, 1)
        level = np.abs(np.asarray(a_ref))
    excess = 0.0
    if not math.isinf(mol.eps):
        for j, ring in _molecule_rings(mol):
            measured = _restricted_l2(g, level, ring.mask)
            bound = 2.0 ** (-j * mol.eps) * mol.ball.scaled(2 ** j).volume ** -0.5
            if bound > 0:
                excess = max(excess, measured / bound)

    ok = fact_err <= fact_tol and not violations
    return ValidationReport(ok, fact_err, violations, tuple_warning, l1,
                            profile, excess)


# -- synthesized molecules from tent atoms ---------------------------------

def _horner_profile_sum(g: WeightedGraph, values: np.ndarray, coeffs, prefix):
    """sum_l coeffs[l-1] P^{l-1} prefix(values[:, l-1]).

    Applying the (level-independent) prefix before the Horner scan keeps
    partial sums at the output scale; it is evaluated on all levels at
    once, so the scan costs one matvec per level.
    """
    W = markov_matrix(g)
    U = prefix(values) * coeffs[None, :]
    acc = np.zeros(g.n)
    for l in range(values.shape[1], 0, -1):
        acc = W @ acc + U[:, l - 1]
    return acc


def synthesis_eta(M: int, beta: float, eps: float, d0: float) -> int:
    """Integer eta with eta >= d0/4 + eps/2 + beta + M + 1 > eta - 1."""
    return math.ceil(d0 / 4.0 + eps / 2.0 + beta) + M + 1


def synthesis_eta_forms(M: int, eps: float, d0: float) -> int:
    return math.ceil(d0 / 4.0 + eps / 2.0) + M + 2


def make_molecule_from_tent_atom(A: TentAtom, M: int, beta: float, eps: float,
                                 d0=None, fact_tol=1e-9) -> Molecule:
    """Synthesize the bz2 molecule carried by a tent atom.

    The pre-image is

        b = sum_l (c_l^eta / l^beta) ((I + s Delta)/s)^M
            Delta^{eta - beta - M} (I + P)^eta P^{l-1} A(., l-1)

    with s = r^2 and eta as in `synthesis_eta`; the molecule is
    a = [I - (I + s Delta)^{-1}]^M b = pi_{eta, beta}(A).  Both are
    divided by the measured annulus excess (kept in norm_constant) so
    the returned molecule validates as-is.
    """
    g = A.ball.graph
    if d0 is None:
        d0 = cached_geometry(g).d0_estimate
    if math.isinf(eps):
        raise ValueError("synthesized molecules need a finite eps")
    r = int(round(A.ball.radius))
    s = max(1, r * r)
    eta = synthesis_eta(M, beta, eps, d0)
    exp = eta - beta - M
    integer_exp = float(exp).is_integer()

    def prefix(v):
        for _ in range(eta):
            v = v + apply_P(g, v)
        if integer_exp:
            for _ in range(int(exp)):
                v = v - apply_P(g, v)
        else:
            v = delta_power_exact(g, v, exp)
        for _ in range(M):
            v = (v + s * (v - apply_P(g, v))) / s
        return v

    count = A.values.values.shape[1]
    c = eta_coefficients(eta, count)
    coeffs = c / (np.arange(1, count + 1, dtype=float) ** beta)
    b = _horner_profile_sum(g, A.values.values, coeffs, prefix)
    a = b.copy()
    for _ in range(M):
        a = a - resolvent_apply(g, a, s, 1.0)

    mol_ball = ball(g, A.ball.center, r)
    mol = Molecule("bz2", M, eps, s, mol_ball, b, a)
    excess = 1.0
    for j, measured, bound in validate_molecule(mol, raise_on_fail=False).size_violations:
        if bound > 0:
            excess = max(excess, measured / bound * (1.0 + 1e-12))
    mol.b = b / excess
    mol.a = a / excess
    mol.norm_constant = excess
    report = validate_molecule(mol, fact_tol=fact_tol, raise_on_fail=False)
    if not report.ok:
        raise ValidationFailed(
            f"synthesized molecule fails validation: fact_err = "
            f"{report.factorization_error:.3e}, violations = {report.size_violations}"
        )
    return mol


def make_form_molecule_from_tent_atom(A: TentAtom, M: int, eps: float,
                                      d0=None, fact_tol=1e-9) -> Molecule:
    """Form analogue with beta = 1/2 and a trailing d Delta^{-1/2},
    i.e. a = s^{M+1/2} d Delta^M (I + s Delta)^{-M-1/2} b."""
    g = A.ball.graph
    if d0 is None:
        d0 = cached_geometry(g).d0_estimate
    r = int(round(A.ball.radius))
    s = max(1, r * r)
    eta = synthesis_eta_forms(M, eps, d0)
    exp = eta - 1 - M
    if exp < 0:
        raise ValueError("eta too small for the form pre-image")

    def prefix(v):
        for _ in range(eta):
            v = v + apply_P(g, v)
        for _ in range(int(exp)):
            v = v - apply_P(g, v)
        v = resolvent_exact(g, v, s, -(M + 0.5))  # ((I + s Delta))^{M+1/2}
        return v / s ** (M + 0.5)

    count = A.values.values.shape[1]
    c = eta_coefficients(eta, count)
    coeffs = c / np.sqrt(np.arange(1, count + 1, dtype=float))
    b = _horner_profile_sum(g, A.values.values, coeffs, prefix)
    v = b.copy()
    for _ in range(M):
        v = v - apply_P(g, v)
    v = resolvent_apply(g, v, s, M + 0.5)
    a = differential(g, s ** (M + 0.5) * v)

    mol_ball = ball(g, A.ball.center, r)
    mol = Molecule("form", M, eps, s, mol_ball, b, a)
    excess = 1.0
    for j, measured, bound in validate_molecule(mol, raise_on_fail=False).size_violations:
        if bound > 0:
            excess = max(excess, measured / bound * (1.0 + 1e-12))
    mol.b = b / excess
    mol.a = EdgeFunction(g, a.data / excess)
    mol.norm_constant = excess
    report = validate_molecule(mol, fact_tol=fact_tol, raise_on_fail=False)
    if not report.ok:
        raise ValidationFailed(
            f"synthesized form molecule fails validation: fact_err = "
            f"{report.factorization_error:.3e}, violations = {report.size_violations}"
        )
    return mol


# -- molecular decompositions ------------------------------------------------

@dataclass
class MolecularDecomposition:
    coefficients: list            # (lambda_i, Molecule)
    sum_abs_lambda: float
    l1_residual: float
    l2_residual: float
    quad_norm: float

    @property
    def quad_ratio(self):
        return self.sum_abs_lambda / self.quad_norm if self.quad_norm else math.inf

    def to_json(self):
        return json.dumps(
            {
                "molecules": [
                    {
                        "lambda": lam,
                        "kind": mol.kind,
                        "M": mol.M,
                        "eps": mol.eps if math.isfinite(mol.eps) else "inf",
                        "s": mol.s,
                        "center": int(mol.ball.center),
                        "radius": float(mol.ball.radius),
                        "norm_constant": mol.norm_constant,
                    }
                    for lam, mol in self.coefficients
                ],
                "sum_abs_lambda": self.sum_abs_lambda,
                "l1_residual": self.l1_residual,
                "l2_residual": self.l2_residual,
                "quad_norm": self.quad_norm,
            },
            indent=2,
        )


def heat_profile(g: WeightedGraph, f, beta: float, l_max: int) -> SpaceTimeFunction:
    """F(., l) = [(l+1) Delta]^beta P^l f for l = 0..l_max."""
    if has_oracle(g):
        u = delta_power_exact(g, f, beta)
    else:
        u = delta_power(g, f, beta)
    W = markov_matrix(g)
    vals = np.empty((g.n, l_max + 1))
    for l in range(l_max + 1):
        vals[:, l] = (l + 1.0) ** beta * u
        if l < l_max:
            u = W @ u
    return SpaceTimeFunction(g, vals)


def form_profile(g: WeightedGraph, w, l_max: int) -> SpaceTimeFunction:
    """F(., l) = sqrt(l+1) P^l w (w = d*G for the forms pipeline)."""
    W = markov_matrix(g)
    vals = np.empty((g.n, l_max + 1))
    u = np.asarray(w, dtype=float)
    for l in range(l_max + 1):
        vals[:, l] = math.sqrt(l + 1.0) * u
        if l < l_max:
            u = W @ u
    return SpaceTimeFunction(g, vals)


def pipeline_l_max(g: WeightedGraph, eta: int, tol: float, ref_norm: float) -> int:
    target = tol / (2.0 * max(ref_norm, 1e-300))
    return max(default_l_max(g), reproducing_l_max(g, eta, target))


def molecular_decompose(g: WeightedGraph, f, M: int, beta: float, eps: float,
                        tol=1e-8) -> MolecularDecomposition:
    """Molecular representation of a mean-zero f in L^2.

    Heat profile -> tent atoms -> one bz2 molecule per atom.  The
    horizon is chosen from the spectral gap so the reproducing sum
    meets tol/2, and the tent partition is exact, so the final L^2
    residual lands below tol.
    """
    f = require_mean_zero(g, f)
    d0 = cached_geometry(g).d0_estimate
    eta = synthesis_eta(M, beta, eps, d0)
    norm_f = lp_norm(g, f, 2)
    if norm_f == 0.0:
        return MolecularDecomposition([], 0.0, 0.0, 0.0, 0.0)
    l_max = pipeline_l_max(g, eta, tol, norm_f)
    F = heat_profile(g, f, beta, l_max)
    tdec = atomic_decompose(g, F, tol=tol)
    coefficients = []
    rec = np.zeros(g.n)
    for lam, atom in tdec.coefficients:
        mol = make_molecule_from_tent_atom(atom, M, beta, eps, d0=d0)
        lam_adj = lam * mol.norm_constant
        coefficients.append((lam_adj, mol))
        rec += lam_adj * np.asarray(mol.a)
    l2_res = lp_norm(g, f - rec, 2)
    if l2_res > tol:
        raise NonConvergent(
            f"molecular reconstruction residual {l2_res:.3e} above {tol:.3e}"
        )
    qn = quad_norm(g, f, beta, l_max)
    return MolecularDecomposition(
        coefficients,
        float(sum(abs(l) for l, _ in coefficients)),
        lp_norm(g, f - rec, 1),
        l2_res,
        qn,
    )


def is_exact_form(g: WeightedGraph, F: EdgeFunction, tol=1e-8) -> bool:
    w = divergence(g, F)
    w = mean_project(g, w)
    u = delta_inverse_exact(g, w, 1.0)
    dd = differential(g, u)
    return lp_norm_forms(g, dd - F, 2) <= tol * max(1.0, lp_norm_forms(g, F, 2))


def form_molecular_decompose(g: WeightedGraph, F: EdgeFunction, M: int,
                             eps: float, tol=1e-8) -> MolecularDecomposition:
    """Molecular representation of an exact 1-form F = dg."""
    if not is_exact_form(g, F, tol):
        raise NotExactForm("input form is not a differential")
    w = divergence(g, F)
    norm_F = lp_norm_forms(g, F, 2)
    if norm_F == 0.0:
        return MolecularDecomposition([], 0.0, 0.0, 0.0, 0.0)
    d0 = cached_geometry(g).d0_estimate
    eta = synthesis_eta_forms(M, eps, d0)
    # d is L^2-bounded by sqrt(2), keep that margin in the horizon target
    l_max = pipeline_l_max(g, eta, tol / math.sqrt(2.0), norm_F)
    prof = form_profile(g, w, l_max)
    tdec = atomic_decompose(g, prof, tol=tol)
    coefficients = []
    rec = np.zeros(g.adjacency.nnz)
    for lam, atom in tdec.coefficients:
        mol = make_form_molecule_from_tent_atom(atom, M, eps, d0=d0)
        lam_adj = lam * mol.norm_constant
        coefficients.append((lam_adj, mol))
        rec += lam_adj * mol.a.data
    resid = EdgeFunction(g, F.data - rec)
    l2_res = lp_norm_forms(g, resid, 2)
    if l2_res > tol:
        raise NonConvergent(
            f"form reconstruction residual {l2_res:.3e} above {tol:.3e}"
        )
    qn = quad_norm(g, delta_inv_sqrt_exact(g, mean_project(g, w)), 0.5, l_max)
    return MolecularDecomposition(
        coefficients,
        float(sum(abs(l) for l, _ in coefficients)),
        lp_norm_forms(g, resid, 1),
        l2_res,
        qn,
    )


# -- BMO norms ----------------------------------------------------------------

@dataclass
class BmoReport:
    kind: str
    M: int
    value: float
    argmax: dict
    enumeration_policy: str

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "M": self.M,
                "value": self.value,
                "argmax": self.argmax,
                "enumeration_policy": self.enumeration_policy,
            },
            indent=2,
        )


def _bz1_apply_from_powers(PK: np.ndarray, f, times) -> np.ndarray:
    """(I - P^{s_1})...(I - P^{s_M}) f via precomputed P^k f columns."""
    out = np.zeros_like(f)
    M = len(times)
    for bits in range(1 << M):
        k = 0
        sign = 1.0
        for i in range(M):
            if bits >> i & 1:
                k += times[i]
                sign = -sign
        out += sign * PK[:, k]
    return out


TUPLE_EXHAUSTIVE_CAP = 4096


def bmo_norm(g: WeightedGraph, f, kind: str, M: int, s_max: int,
             tuple_policy="auto", seed=0) -> BmoReport:
    """sup over times s <= s_max and balls of radius ceil(sqrt(s)) of
    the normalized local L^2 mass of A_s f.

    bz1 tuples are enumerated exhaustively while s^M <= 4096, otherwise
    the endpoint tuples plus 32 seeded samples are used;
    `tuple_policy` in {"auto", "exhaustive", "sampled"} overrides.
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if tuple_policy not in ("auto", "exhaustive", "sampled"):
        raise ValueError("tuple_policy must be auto, exhaustive or sampled")
    f = np.asarray(f, dtype=float)
    D = g.dist
    best = (-1.0, None)
    policies = set()
    if kind == "bz1":
        kmax = 2 * s_max * M
        PK = np.empty((g.n, kmax + 1))
        PK[:, 0] = f
        W = markov_matrix(g)
        for k in range(1, kmax + 1):
            PK[:, k] = W @ PK[:, k - 1]
    rng = np.random.default_rng(seed)
    for s in range(1, s_max + 1):
        r = math.ceil(math.sqrt(s))
        mask = D < r
        vols = mask @ g.m
        if kind == "bz2":
            u = f.copy()
            for _ in range(M):
                u = u - resolvent_apply(g, u, s, 1.0)
            candidates = [((), u)]
            policies.add("exhaustive")
        elif kind == "bz1":
            exhaustive = s ** M <= TUPLE_EXHAUSTIVE_CAP
            if tuple_policy != "auto":
                exhaustive = tuple_policy == "exhaustive"
            if exhaustive:
                tuples = itertools.product(range(s, 2 * s + 1), repeat=M)
                policies.add("exhaustive")
            else:
                corner = list(itertools.product((s, 2 * s), repeat=M))
                sampled = [tuple(rng.integers(s, 2 * s + 1, size=M))
                           for _ in range(32)]
                tuples = corner + sampled
                policies.add("sampled")
            candidates = ((t, _bz1_apply_from_powers(PK, f, t)) for t in tuples)
        else:
            raise ValueError("kind must be 'bz1' or 'bz2'")
        for times, u in candidates:
            local = (mask @ (u * u * g.m)) / vols
            x = int(np.argmax(local))
            val = math.sqrt(float(local[x]))
            if val > best[0]:
                best = (val, {"s": s, "times": list(times), "center": x,
                              "radius": r})
    policy = "+".join(sorted(policies))
    return BmoReport(kind, M, best[0], best[1], policy)


def m0_norm(g: WeightedGraph, phi, M: int, eps: float, x0: int,
            phi_tilde=None) -> float:
    """Dual-test-class norm sup_j 2^{j eps} V(2^j B_0)^{1/2}
    ||phi_tilde||_{L^2(C_j(B_0))} with B_0 = {x0} and phi = Delta^M phi_tilde."""
    g_ball = ball(g, x0, 1)
    if phi_tilde is None:
        phi_tilde = require_mean_zero(g, phi)
        phi_tilde = delta_inverse_exact(g, phi_tilde, float(M))
    out = 0.0
    j = 1
    while True:
        ring = annulus(g_ball, j)
        term = (2.0 ** (j * eps)
                * math.sqrt(g_ball.scaled(2 ** j).volume)
                * _restricted_l2(g, np.asarray(phi_tilde), ring.mask))
        out = max(out, term)
        if 2 ** (j + 1) * g_ball.radius > g.diameter:
            break
        j += 1
    return out


def duality_pairing(g: WeightedGraph, f, decomp: MolecularDecomposition) -> float:
    """<f, sum_i lambda_i a_i> with the m-weighted pairing."""
    total = 0.0
    for lam, mol in decomp.coefficients:
        total += lam * inner(g, f, np.asarray(mol.a))
    return total
