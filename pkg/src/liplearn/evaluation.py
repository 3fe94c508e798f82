"""Nearest-vertex classification, accuracy/confidence metrics, and the
perturbation sensitivity protocol with its loss-degradation bound check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, _pairwise_sq_dists
from .graph import Graph, VertexSet, graph_lipschitz
from .loss import LossSpec, as_labeling

__all__ = ["EvalMetrics", "SensitivityReport", "classify", "evaluate", "sensitivity"]


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    mean_confidence: float
    test_loss: float
    n_test: int


@dataclass
class SensitivityReport:
    """Worst-case confidence change under unit-budget input perturbations,
    together with the loss-degradation bound lip(loss) * lip(model) * delta.

    ``bound_satisfied`` certifies the loss bound only over perturbations whose
    nominal and perturbed nearest vertices are graph-adjacent (or equal);
    there the piecewise-constant decision rule makes the bound literal, with
    the effective radius max(delta, vertex distance).
    """

    max_confidence_degradation: float
    degradations: np.ndarray
    bound_value: float
    bound_satisfied: bool
    delta: float
    n_adjacent: int


def _nearest_vertex(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _pairwise_sq_dists(np.atleast_2d(x), points).argmin(axis=1)


def classify(vertices: VertexSet, labeling: np.ndarray, x: np.ndarray):
    """Assign x to its nearest vertex; class is the argmax entry of that
    vertex's output (lowest index wins ties), confidence its value."""
    labeling = as_labeling(labeling)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != vertices.dim:
        raise ValueError(f"input must be a {vertices.dim}-vector")
    vid = int(_nearest_vertex(vertices.points, x)[0])
    row = labeling[vid]
    cls = int(row.argmax())
    return cls, float(row[cls]), vid


def evaluate(vertices: VertexSet, labeling: np.ndarray, testset: LabeledDataset,
             spec: LossSpec) -> EvalMetrics:
    """Accuracy, mean confidence and mean loss of nearest-vertex prediction."""
    labeling = as_labeling(labeling)
    if testset.n < 1:
        raise ValueError("empty test set")
    if labeling.shape[1] != testset.dim_y:
        raise ValueError("labeling and test set output dimensions differ")
    assign = _pairwise_sq_dists(testset.x, vertices.points).argmin(axis=1)
    rows = labeling[assign]
    pred = rows.argmax(axis=1)
    truth = testset.y.argmax(axis=1)
    diff = rows - testset.y
    loss = float(np.einsum("ij,ij->", diff, diff) / testset.n)
    return EvalMetrics(
        accuracy=float((pred == truth).mean()),
        mean_confidence=float(rows.max(axis=1).mean()),
        test_loss=loss,
        n_test=testset.n,
    )


def _orthogonal_direction(t: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to t: Gram-Schmidt against the
    lowest-index basis vector not parallel to t."""
    t = t / np.linalg.norm(t)
    for k in range(t.shape[0]):
        e = np.zeros_like(t)
        e[k] = 1.0
        u = e - np.dot(e, t) * t
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            return u / norm
    raise ValueError("cannot build an orthogonal direction in dimension < 2")


def sensitivity(vertices: VertexSet, graph: Graph, labeling: np.ndarray,
                testset: LabeledDataset, delta: float,
                spec: LossSpec | None = None) -> SensitivityReport:
    """Perturb each test input by ``delta`` orthogonally to the closest
    incident edge of its nearest vertex, reclassify, and record the norm of
    the confidence-vector change.

    Perturbed points are clipped to the declared input box. The report's
    bound compares loss degradation against lip(loss) * lip(model) * radius
    for the graph-adjacent reassignments.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if vertices.dim < 2:
        raise ValueError("perturbation direction needs input dimension >= 2")
    labeling = as_labeling(labeling)
    spec = spec if spec is not None else LossSpec.squared_for_simplex(labeling.shape[1])
    pts = vertices.points
    assign = _pairwise_sq_dists(testset.x, pts).argmin(axis=1)

    perturbed = np.empty_like(testset.x)
    for s in range(testset.n):
        x = testset.x[s]
        i = assign[s]
        edges = graph.incident_edges(i)
        best_e, best_d = -1, np.inf
        for e in edges:
            a, b = graph.edge_index[e]
            pa, pb = pts[a], pts[b]
            seg = pb - pa
            tt = np.clip(np.dot(x - pa, seg) / np.dot(seg, seg), 0.0, 1.0)
            dist = np.linalg.norm(x - (pa + tt * seg))
            if dist < best_d - 1e-15:
                best_d, best_e = dist, e
        a, b = graph.edge_index[best_e]
        u = _orthogonal_direction(pts[b] - pts[a])
        perturbed[s] = np.clip(x + delta * u, testset.x_low, testset.x_high)

    assign_p = _pairwise_sq_dists(perturbed, pts).argmin(axis=1)
    deg = np.linalg.norm(labeling[assign] - labeling[assign_p], axis=1)

    lip_model = graph_lipschitz(graph, labeling)
    bound_value = spec.lipschitz_const * lip_model * delta
    adjacent = {(int(i), int(j)) for i, j in graph.edge_index}
    ok = True
    n_adj = 0
    for s in range(testset.n):
        i, j = int(assign[s]), int(assign_p[s])
        if i == j:
            n_adj += 1
            continue
        if (min(i, j), max(i, j)) not in adjacent:
            continue
        n_adj += 1
        y = testset.y[s]
        li = float(np.sum((labeling[i] - y) ** 2))
        lj = float(np.sum((labeling[j] - y) ** 2))
        radius = max(delta, float(np.linalg.norm(pts[i] - pts[j])))
        if abs(lj - li) > spec.lipschitz_const * lip_model * radius + 1e-9:
            ok = False
    return SensitivityReport(
        max_confidence_degradation=float(deg.max(initial=0.0)),
        degradations=deg,
        bound_value=float(bound_value),
        bound_satisfied=ok,
        delta=float(delta),
        n_adjacent=n_adj,
    )
