"""Independent brute-force reference solver for tiny constrained instances.

Used by the test suite to cross-check the primal-dual solver; deliberately
shares no code path with it. Scalar outputs are solved by refined exhaustive
grid search; vector outputs by long-horizon projected gradient descent with
Dykstra-corrected alternating projections onto the edge constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .exceptions import OracleUncertifiedError
from .graph import DatasetPartition, Graph, graph_lipschitz
from .loss import LossSpec, empirical_loss

__all__ = ["OracleConfig", "oracle_solve"]

_SIZE_CAP = 12


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: int = 13
    refinements: int = 7
    pg_iters: int = 200_000
    pg_step: float = 0.005
    tol: float = 1e-4

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_resolution < 3:
            raise ValueError("grid_resolution must be at least 3")


def _feasible(graph: Graph, labeling: np.ndarray, alpha: float, tol: float) -> bool:
    d = labeling[graph.edge_index[:, 0]] - labeling[graph.edge_index[:, 1]]
    norms = np.sqrt(np.einsum("ij,ij->i", d, d))
    return bool((norms <= alpha * graph.edge_lengths + tol).all())


def _grid_search(graph, partition, dataset, alpha, spec, config):
    n = graph.n
    ei, ej = graph.edge_index[:, 0], graph.edge_index[:, 1]
    caps = alpha * graph.edge_lengths
    counts = partition.cell_counts().astype(float)
    ysums = partition.label_sums(dataset).ravel()
    ysq = float(np.einsum("ij,ij->", dataset.y, dataset.y))

    def batch_loss(vs):
        # vs: (B, n); empirical loss of each scalar labeling
        return (vs * vs) @ counts / dataset.n - 2.0 * (vs @ ysums) / dataset.n \
            + ysq / dataset.n

    lo = float(dataset.y.min())
    hi = float(dataset.y.max())
    if hi <= lo:
        hi = lo + 1.0
    centers = np.full(n, 0.5 * (lo + hi))
    half = 0.5 * (hi - lo)
    res = config.grid_resolution
    if res % 2 == 0:
        res += 1  # keep the (feasible) center on the grid
    best = None
    best_val = np.inf
    for _ in range(config.refinements + 1):
        axes = [centers[i] + np.linspace(-half, half, res) for i in range(n)]
        combos = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        feas = np.ones(combos.shape[0], dtype=bool)
        for e in range(len(caps)):
            feas &= np.abs(combos[:, ei[e]] - combos[:, ej[e]]) <= caps[e] + 1e-12
        if not feas.any():
            half *= 0.5
            continue
        vals = batch_loss(combos[feas])
        k = int(vals.argmin())
        if vals[k] < best_val:
            best_val = float(vals[k])
            best = combos[feas][k]
        centers = best
        step = 2.0 * half / (res - 1)
        half = 1.5 * step
    if best is None:
        raise OracleUncertifiedError("grid search found no feasible point")
    # certificate: no single-coordinate move at the final resolution improves
    step = 2.0 * half / (res - 1)
    probes = np.repeat(best[None, :], 2 * n, axis=0)
    for i in range(n):
        probes[2 * i, i] += step
        probes[2 * i + 1, i] -= step
    feas = np.ones(probes.shape[0], dtype=bool)
    for e in range(len(caps)):
        feas &= np.abs(probes[:, ei[e]] - probes[:, ej[e]]) <= caps[e] + 1e-12
    if feas.any() and batch_loss(probes[feas]).min() < best_val - config.tol:
        raise OracleUncertifiedError("grid incumbent not locally optimal")
    return best[:, None]


def _project_edges_dykstra(graph, labeling, alpha, sweeps=60):
    """Dykstra-corrected cyclic projection onto the edge constraint sets."""
    v = labeling.copy()
    m = graph.n_edges
    corrections = np.zeros((m, 2, labeling.shape[1]))
    caps = alpha * graph.edge_lengths
    for _ in range(sweeps):
        moved = 0.0
        for e in range(m):
            i, j = graph.edge_index[e]
            vi = v[i] + corrections[e, 0]
            vj = v[j] + corrections[e, 1]
            d = vi - vj
            dist = float(np.linalg.norm(d))
            if dist <= caps[e] or dist == 0.0:
                pi, pj = vi, vj
            else:
                excess = 0.5 * (dist - caps[e]) / dist
                pi = vi - excess * d
                pj = vj + excess * d
            corrections[e, 0] = vi - pi
            corrections[e, 1] = vj - pj
            moved = max(moved, float(np.abs(v[i] - pi).max()),
                        float(np.abs(v[j] - pj).max()))
            v[i], v[j] = pi, pj
        if moved < 1e-14:
            break
    return v


def _projected_gradient(graph, partition, dataset, alpha, spec, config):
    counts = partition.cell_counts()
    acoef = (2.0 / dataset.n) * counts[:, None]
    bmat = (2.0 / dataset.n) * partition.label_sums(dataset)
    v = _project_edges_dykstra(graph, partition.cell_means(dataset), alpha)
    step = config.pg_step
    for _ in range(config.pg_iters):
        g = acoef * v - bmat
        v_new = _project_edges_dykstra(graph, v - step * g, alpha)
        if np.abs(v_new - v).max() < 1e-13:
            v = v_new
            break
        v = v_new
    # certificate: feasible, and no projected move along the loss gradient
    # improves the objective beyond tol
    if not _feasible(graph, v, alpha, 10 * config.tol):
        raise OracleUncertifiedError("projected-gradient output violates constraints")
    base = empirical_loss(partition, dataset, v, spec)
    probe = _project_edges_dykstra(graph, v - step * (acoef * v - bmat), alpha)
    if empirical_loss(partition, dataset, probe, spec) < base - config.tol:
        raise OracleUncertifiedError("projected-gradient output not stationary")
    return v


def oracle_solve(graph: Graph, partition: DatasetPartition, dataset: LabeledDataset,
                 alpha: float, spec: LossSpec,
                 config: OracleConfig | None = None) -> np.ndarray:
    """Ground-truth labeling for instances with n * dim_y <= 12.

    Scalar outputs use exhaustive grid search (refined twice around the
    incumbent); vector outputs use projected gradient with Dykstra
    projections. Raises OracleUncertifiedError when self-certification
    fails, so a comparison test can never silently pass.
    """
    config = config or OracleConfig()
    if graph.n * dataset.dim_y > _SIZE_CAP:
        raise ValueError(
            f"oracle limited to n*dim_y <= {_SIZE_CAP}, got {graph.n * dataset.dim_y}"
        )
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0.0:
        return np.tile(dataset.y.mean(axis=0), (graph.n, 1))
    if dataset.dim_y == 1 and config.grid_resolution ** graph.n <= 3_000_000:
        return _grid_search(graph, partition, dataset, alpha, spec, config)
    return _projected_gradient(graph, partition, dataset, alpha, spec, config)
