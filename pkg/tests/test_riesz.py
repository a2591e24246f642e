import math

import numpy as np
import pytest

from graphhardy.errors import KernelComponent
from graphhardy.operators import (
    EdgeFunction,
    differential,
    divergence,
    lp_norm,
    lp_norm_forms,
    random_mean_zero,
    tx_norms,
)
from graphhardy.riesz import (
    gradient_matches_fiber_norms,
    h2_project,
    isometry_defect,
    molecule_suite,
    riesz,
    riesz_h1_experiment,
    thread_cap,
)


def test_riesz_k2l(k2l, f0):
    res = riesz(k2l, f0)
    # Delta f0 = f0, so the transform is just d f0
    np.testing.assert_allclose(res.output.data, differential(k2l, f0).data, atol=1e-12)
    assert res.norm_l2_output == pytest.approx(2.0, abs=1e-12)
    assert res.norm_l2_input == pytest.approx(2.0, abs=1e-12)
    assert res.norm_l1_gradient == pytest.approx(4.0, abs=1e-12)
    assert res.h1_quad_input == pytest.approx(4.0, abs=1e-11)
    ratio = res.norm_l1_gradient / res.h1_quad_input
    assert ratio == pytest.approx(1.0, abs=1e-11)


def test_riesz_zero(cycle16):
    res = riesz(cycle16, np.zeros(cycle16.n))
    assert res.norm_l2_output == 0.0


def test_riesz_requires_mean_zero(cycle16):
    with pytest.raises(KernelComponent):
        riesz(cycle16, np.ones(cycle16.n))


def test_riesz_isometry(cycle32):
    for seed in range(10):
        f = random_mean_zero(cycle32, np.random.default_rng(seed))
        assert isometry_defect(cycle32, f) <= 1e-9


def test_gradient_form_is_fiber_norm(cycle32, rng):
    f = random_mean_zero(cycle32, rng)
    res = riesz(cycle32, f)
    np.testing.assert_allclose(
        res.gradient_form, tx_norms(cycle32, res.output), atol=1e-12
    )
    assert gradient_matches_fiber_norms(cycle32, f) < 1e-12


def test_riesz_l2_gradient_chain(cycle16, rng):
    # || grad Delta^{-1/2} f ||_2 = ||f||_2 through the energy identity
    f = random_mean_zero(cycle16, rng)
    res = riesz(cycle16, f)
    assert lp_norm(cycle16, res.gradient_form, 2) == pytest.approx(
        res.norm_l2_input, rel=1e-10
    )


def test_h2_project_fixes_differentials(cycle16, rng):
    f = random_mean_zero(cycle16, rng)
    F = differential(cycle16, f)
    P = h2_project(cycle16, F)
    assert lp_norm_forms(cycle16, P - F, 2) <= 1e-10


def test_h2_project_k2l_single_edge(k2l):
    data = np.zeros(k2l.adjacency.nnz)
    rows, cols = k2l.edge_rows, k2l.edge_cols
    data[(rows == 0) & (cols == 1)] = 1.0
    data[(rows == 1) & (cols == 0)] = -1.0
    F = EdgeFunction(k2l, data)
    P = h2_project(k2l, F)
    # on this graph the edge indicator is itself exact: F = d(f0/2)
    np.testing.assert_allclose(P.data, F.data, atol=1e-12)


def test_h2_project_idempotent_and_orthogonal(cycle16, rng):
    data = rng.standard_normal(cycle16.adjacency.nnz)
    data = 0.5 * (data - data[cycle16.rev_edges])
    F = EdgeFunction(cycle16, data)
    P1 = h2_project(cycle16, F)
    P2 = h2_project(cycle16, P1)
    assert lp_norm_forms(cycle16, P2 - P1, 2) <= 1e-10
    # residual is L^2(T)-orthogonal to every differential
    resid = EdgeFunction(cycle16, F.data - P1.data)
    from graphhardy.operators import inner_forms

    for i in range(0, cycle16.n, 3):
        e = np.eye(cycle16.n)[i]
        assert abs(inner_forms(cycle16, resid, differential(cycle16, e))) < 1e-10


def test_h2_projection_basis_idempotent(cycle16):
    nnz = cycle16.adjacency.nnz
    rows, cols = cycle16.edge_rows, cycle16.edge_cols
    rev = cycle16.rev_edges
    seen = set()
    for e in range(nnz):
        x, y = int(rows[e]), int(cols[e])
        if x >= y or (x, y) in seen:
            continue
        seen.add((x, y))
        data = np.zeros(nnz)
        data[e] = 1.0
        data[rev[e]] = -1.0
        F = EdgeFunction(cycle16, data)
        P1 = h2_project(cycle16, F)
        P2 = h2_project(cycle16, P1)
        assert lp_norm_forms(cycle16, P2 - P1, 2) <= 1e-10


def test_dstar_contraction(cycle32, rng):
    worst = {1: 0.0, 2: 0.0, np.inf: 0.0}
    for _ in range(10):
        data = rng.standard_normal(cycle32.adjacency.nnz)
        data = 0.5 * (data - data[cycle32.rev_edges])
        F = EdgeFunction(cycle32, data)
        h = divergence(cycle32, F)
        for p in worst:
            denom = lp_norm_forms(cycle32, F, p)
            worst[p] = max(worst[p], lp_norm(cycle32, h, p) / denom)
    for p, c in worst.items():
        assert c <= 2.0  # Cauchy-Schwarz on fibers gives sqrt(2)


def test_riesz_experiment_chain_and_ratio(cycle32):
    suite = molecule_suite(cycle32, (1, 4, 16, 64), kind="bz1", M=1,
                           centers=range(0, 32, 4))
    rep = riesz_h1_experiment(cycle32, suite)
    assert rep.max_chain_gap <= 1e-10
    assert math.isfinite(rep.max_ratio)
    grads = [e.grad_l1 for e in rep.entries]
    assert max(grads) / min(grads) <= 10.0


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv("GRAPH_HARDY_THREADS", "2")
    assert thread_cap() == 2
    monkeypatch.setenv("GRAPH_HARDY_THREADS", "bogus")
    assert thread_cap() >= 1


def test_adjoint_isometry_on_exact_forms(cycle32, rng):
    # || Delta^{-1/2} d* F ||_2 = ||F||_{L^2(T)} on the range of the projector
    from graphhardy.calculus import delta_inv_sqrt_exact

    data = rng.standard_normal(cycle32.adjacency.nnz)
    data = 0.5 * (data - data[cycle32.rev_edges])
    F = h2_project(cycle32, EdgeFunction(cycle32, data))
    u = delta_inv_sqrt_exact(cycle32, divergence(cycle32, F))
    assert abs(lp_norm(cycle32, u, 2) - lp_norm_forms(cycle32, F, 2)) <= 1e-9
