import numpy as np
import pytest

import liplearn as ll
from liplearn.exceptions import InfeasibleBudgetError
from liplearn.lipsolver import SolverConfig, solve_lipschitz_constrained
from liplearn.plapsolver import (
    ContinuationSchedule,
    MarginBudget,
    normalized_seminorm,
    p_seminorm,
    robustify,
    solve_p_constrained,
    tradeoff_curve,
)

from conftest import tiny_line_instance


def line_graph():
    vs = ll.VertexSet(np.array([[0.0], [1.0]]))
    return ll.Graph(vs, np.array([[0, 1]]), np.array([1.0]))


def test_p_seminorm_pinned_values():
    g = line_graph()
    v = np.array([[0.0], [1.0]])
    assert p_seminorm(g, v, 2) == pytest.approx(1.0)
    assert p_seminorm(g, v, 4) == pytest.approx(0.5)
    assert p_seminorm(g, np.full((2, 1), 0.3), 8) == 0.0
    with pytest.raises(ValueError):
        p_seminorm(g, v, 1.0)


def test_normalized_seminorm_monotone_in_p_fixed_labeling():
    rng = np.random.default_rng(0)
    vs = ll.VertexSet(rng.uniform(0, 1, (12, 2)))
    g = ll.build_knn_graph(vs, 3)
    v = rng.uniform(0, 1, (12, 2))
    vals = [normalized_seminorm(g, v, p) for p in (2, 4, 8, 16, 32, 64)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    ratios = np.linalg.norm(v[g.edge_index[:, 0]] - v[g.edge_index[:, 1]], axis=1) / g.edge_lengths
    assert vals[-1] <= ratios.max() + 1e-9


def test_solve_p_constant_within_budget_gives_kappa_zero():
    graph, part, ds, spec = tiny_line_instance()
    mean_loss = ll.empirical_loss(part, ds, np.full((2, 1), 0.5), spec)
    budget = MarginBudget(mean_loss, 0.1)
    v, kappa, diag = solve_p_constrained(graph, part, ds, 2.0, budget, spec,
                                         SolverConfig(h0=1.0), init=np.array([[0.2], [0.9]]))
    assert kappa == 0.0
    assert np.allclose(v, 0.5)
    assert p_seminorm(graph, v, 2) == 0.0
    assert diag.converged


def test_solve_p_two_vertex_closed_form():
    graph, part, ds, spec = tiny_line_instance()
    v, kappa, diag = solve_p_constrained(
        graph, part, ds, 2.0, MarginBudget(0.0625, 0.0), spec,
        SolverConfig(h0=1.0, max_iters=100_000), init=np.array([[0.3], [0.7]]))
    assert np.abs(v.ravel() - [0.25, 0.75]).max() < 1e-4
    assert kappa > 0
    assert abs(diag.loss - 0.0625) < 1e-7
    assert diag.slack < 1e-6


def test_solve_p_infeasible_budget_raises():
    graph, part, ds, spec = tiny_line_instance()
    # cell means reach loss 0 here, so shift labels to make the floor positive
    ds2 = ll.LabeledDataset(np.array([[0.0], [0.05], [1.0]]),
                            np.array([[0.0], [1.0], [0.5]]))
    part2 = ll.partition_dataset(graph.vertices, ds2)
    with pytest.raises(InfeasibleBudgetError):
        solve_p_constrained(graph, part2, ds2, 2.0, MarginBudget(0.0, 0.0), spec,
                            SolverConfig(h0=1.0), init=np.zeros((2, 1)))


@pytest.fixture(scope="module")
def small_board():
    ds = ll.gen_checkerboard(ll.CheckerboardSpec(1500, 4, 2))
    vs = ll.select_vertices(ds, 70, "iid", 3)
    graph = ll.build_knn_graph(vs, 8)
    part = ll.partition_dataset(vs, ds)
    spec = ll.LossSpec.squared_for_simplex(2)
    cfg = SolverConfig(h0=1.0, max_iters=80_000, project_to_y=True, kkt_tol=1e-7)
    ref = solve_lipschitz_constrained(graph, part, ds, 3.0, spec, cfg)
    assert ref.converged
    return ds, graph, part, spec, ref


def test_robustify_ladder_monotone_and_feasible(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(config=SolverConfig(h0=1.0, max_iters=80_000,
                                                     project_to_y=True))
    rep = robustify(graph, part, ds, 3.0, 0.05, spec, sched, reference=ref)
    rs = [rec.seminorm_norm for rec in rep.records]
    assert all(b >= a - 1e-6 for a, b in zip(rs, rs[1:]))
    for rec in rep.records:
        assert rec.loss <= rep.budget + 1e-6
        assert rec.kappa * abs(rec.loss - rep.budget) <= 1e-6


def test_robustify_epsilon_zero_bounded_by_alpha(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(config=SolverConfig(h0=1.0, max_iters=80_000,
                                                     project_to_y=True))
    rep = robustify(graph, part, ds, 3.0, 0.0, spec, sched, reference=ref)
    assert rep.lipschitz <= 3.0 * 1.05
    assert abs(rep.records[-1].loss - ref.loss) <= 1e-6 * max(1.0, ref.loss)


def test_robustify_huge_margin_exact_constant(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(config=SolverConfig(h0=1.0, project_to_y=True))
    rep = robustify(graph, part, ds, 3.0, 2.0, spec, sched, reference=ref)
    assert rep.lipschitz == 0.0
    assert all(rec.seminorm_norm == 0.0 for rec in rep.records)
    assert all(rec.kappa == 0.0 for rec in rep.records)
    assert np.allclose(rep.labeling, 0.5)


def test_kappa_zero_iff_constant_feasible(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(p_values=(2.0, 4.0),
                                 config=SolverConfig(h0=1.0, max_iters=60_000,
                                                     project_to_y=True))
    tight = robustify(graph, part, ds, 3.0, 0.02, spec, sched, reference=ref)
    assert all(rec.kappa > 0 for rec in tight.records)
    loose = robustify(graph, part, ds, 3.0, 1.0, spec, sched, reference=ref)
    assert all(rec.kappa == 0 for rec in loose.records)


def test_warm_start_consistency_with_cold_rerun(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(p_values=(2.0, 4.0, 8.0),
                                 config=SolverConfig(h0=1.0, max_iters=80_000,
                                                     project_to_y=True))
    rep = robustify(graph, part, ds, 3.0, 0.05, spec, sched, reference=ref)
    warm = rep.records[-1]
    budget = MarginBudget(ref.loss, 0.05)
    cold_cfg = SolverConfig(h0=1.0, max_iters=200_000, project_to_y=True)
    v_cold, _, _ = solve_p_constrained(graph, part, ds, 8.0, budget, spec,
                                       cold_cfg, init=ref.labeling,
                                       stat_tol=1e-9, feas_tol=1e-10)
    cold_val = normalized_seminorm(graph, v_cold, 8.0)
    assert warm.seminorm_norm == pytest.approx(cold_val, rel=1e-4)


def test_tradeoff_monotone_with_collapsed_tail(small_board):
    ds, graph, part, spec, ref = small_board
    sched = ContinuationSchedule(config=SolverConfig(h0=1.0, max_iters=60_000,
                                                     project_to_y=True))
    pts, reps = tradeoff_curve(graph, part, ds, 3.0, [0.0, 0.05, 0.15, 0.6],
                               spec, sched)
    lips = [p.lipschitz for p in pts]
    assert all(b <= a + 1e-6 for a, b in zip(lips, lips[1:]))
    assert pts[-1].lipschitz == 0.0
    assert pts[-1].confidence == 0.5
    with pytest.raises(ValueError):
        tradeoff_curve(graph, part, ds, 3.0, [0.1, 0.05], spec, sched)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ContinuationSchedule(p_values=(2.0, 2.0))
    with pytest.raises(ValueError):
        ContinuationSchedule(p_values=(1.0, 4.0))
