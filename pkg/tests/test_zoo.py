import numpy as np
import pytest

from graphhardy.graphs import geometry_report
from graphhardy.zoo import (
    binary_tree,
    by_name,
    k2l,
    lazy_cycle,
    lazy_path,
    lazy_torus_2d,
    random_weights,
)


def test_k2l_fixture():
    g = k2l()
    np.testing.assert_allclose(g.m, [2.0, 2.0])


def test_lazy_cycle_lower_bound():
    g = lazy_cycle(16, 2)
    rep = geometry_report(g)
    assert rep.eps_LB == pytest.approx(0.5)
    assert 0.8 <= rep.d0_estimate <= 1.3


def test_default_loops_pin_eps_at_half():
    for g in (lazy_cycle(12), lazy_path(9), lazy_torus_2d(6)):
        rep = geometry_report(g)
        assert rep.eps_LB == pytest.approx(0.5)


def test_binary_tree_is_negative_fixture():
    g = binary_tree(8, 1.0)
    rep = geometry_report(g)
    # exponential volume growth shows up as a large doubling constant
    assert rep.doubling_constant > 8.0
    assert rep.eps_LB > 0


def test_torus_coordinates():
    g = lazy_torus_2d(5)
    assert g.n == 25
    # (1, 2) and (1, 3) are adjacent
    assert g.dist[1 * 5 + 2, 1 * 5 + 3] == 1
    assert g.dist[0, 2 * 5 + 2] == 4


def test_random_weights_deterministic():
    base = lazy_cycle(12)
    g1 = random_weights(base, seed=7)
    g2 = random_weights(base, seed=7)
    g3 = random_weights(base, seed=8)
    assert (g1.adjacency != g2.adjacency).nnz == 0
    assert (g1.adjacency != g3.adjacency).nnz > 0
    assert geometry_report(g1).eps_LB > 0


def test_by_name():
    assert by_name("k2l").n == 2
    assert by_name("lazy_cycle_16").n == 16
    assert by_name("lazy_torus_8").n == 64
    assert by_name("lazy_path_9").n == 9
    assert by_name("binary_tree_3").n == 15
    with pytest.raises(ValueError):
        by_name("mystery_graph")


def test_generators_reject_bad_sizes():
    with pytest.raises(ValueError):
        lazy_cycle(2)
    with pytest.raises(ValueError):
        binary_tree(0)


def test_binary_tree_doubling_grows_with_radius():
    from graphhardy.graphs import ball

    g = binary_tree(8, 1.0)
    root = 0
    # the doubling ratio keeps growing until the doubled ball saturates
    ratios = [ball(g, root, 2 * r).volume / ball(g, root, r).volume
              for r in (2, 3, 4)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] > 8.0
