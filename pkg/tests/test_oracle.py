import numpy as np
import pytest

import liplearn as ll
from liplearn.lipsolver import SolverConfig, solve_lipschitz_constrained
from liplearn.oracle import OracleConfig, oracle_solve

from conftest import random_instance, tiny_line_instance


def test_oracle_two_vertex_closed_form():
    graph, part, ds, spec = tiny_line_instance()
    v = oracle_solve(graph, part, ds, 0.5, spec)
    assert np.abs(v.ravel() - [0.25, 0.75]).max() < 1e-4


def test_oracle_alpha_zero_constant_mean():
    graph, part, ds, spec = tiny_line_instance()
    v = oracle_solve(graph, part, ds, 0.0, spec)
    assert np.allclose(v, 0.5)


def test_oracle_inactive_constraints_cell_means():
    rng = np.random.default_rng(2)
    graph, part, ds, spec = random_instance(rng, n=4, k=1, dim_y=1)
    cm = part.cell_means(ds)
    alpha = 3.0 * ll.graph_lipschitz(graph, cm)
    v = oracle_solve(graph, part, ds, alpha, spec)
    assert np.abs(v - cm).max() < 1e-4


def test_oracle_output_feasible_and_competitive():
    rng = np.random.default_rng(3)
    for t in range(6):
        dy = 1 if t < 4 else 2
        graph, part, ds, spec = random_instance(rng, n=4, k=1, dim_y=dy)
        alpha = 10 ** rng.uniform(-0.5, 0.5)
        v = oracle_solve(graph, part, ds, alpha, spec)
        assert ll.graph_lipschitz(graph, v) <= alpha + 1e-4
        rep = solve_lipschitz_constrained(graph, part, ds, alpha, spec,
                                          SolverConfig(kkt_tol=1e-8))
        oracle_obj = ll.empirical_loss(part, ds, v, spec)
        assert oracle_obj <= rep.loss + 1e-4


def test_oracle_size_cap():
    rng = np.random.default_rng(4)
    graph, part, ds, spec = random_instance(rng, n=7, k=2, dim_y=2)
    with pytest.raises(ValueError):
        oracle_solve(graph, part, ds, 1.0, spec)


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(tol=0.0)
    with pytest.raises(ValueError):
        OracleConfig(grid_resolution=2)
