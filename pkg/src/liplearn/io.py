"""CSV and JSON serialization for datasets, vertex sets, graphs, and reports.

Every CSV written here is re-readable by the matching reader in this module;
floats are rendered with repr so round-trips are exact.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .data import LabeledDataset
from .graph import Graph, VertexSet
from .lipsolver import DualEdgeState, KktReport, SolveReport

__all__ = [
    "write_dataset_csv", "read_dataset_csv",
    "write_vertices_csv", "read_vertices_csv",
    "write_graph_csv", "read_graph_csv",
    "write_rows_csv", "read_rows_csv",
    "solve_report_to_dict", "solve_report_from_dict",
    "save_solve_report", "load_solve_report",
]


def _fmt(x) -> str:
    return repr(float(x))


def write_dataset_csv(path, dataset: LabeledDataset) -> None:
    """One row per sample: x0..x{dx-1}, y0..y{dy-1}, with a header."""
    header = [f"x{i}" for i in range(dataset.dim_x)] + [f"y{i}" for i in range(dataset.dim_y)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for xi, yi in zip(dataset.x, dataset.y):
            wr.writerow([_fmt(v) for v in xi] + [_fmt(v) for v in yi])


def read_dataset_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        dim_x = sum(1 for h in header if h.startswith("x"))
        dim_y = len(header) - dim_x
        if dim_x < 1 or dim_y < 1:
            raise ValueError(f"bad dataset header {header!r}")
        rows = [[float(v) for v in row] for row in rd if row]
    arr = np.asarray(rows)
    return LabeledDataset(arr[:, :dim_x], arr[:, dim_x:])


def write_vertices_csv(path, vertices: VertexSet) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"x{i}" for i in range(vertices.dim)])
        for p in vertices.points:
            wr.writerow([_fmt(v) for v in p])


def read_vertices_csv(path, seed: int = 0) -> VertexSet:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        pts = [[float(v) for v in row] for row in rd if row]
    return VertexSet(np.asarray(pts), seed=seed)


def write_graph_csv(path, graph: Graph) -> None:
    """Edge list: i, j, w."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "j", "w"])
        for (i, j), w in zip(graph.edge_index, graph.weights):
            wr.writerow([int(i), int(j), _fmt(w)])


def read_graph_csv(path, vertices: VertexSet) -> Graph:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        rows = [row for row in rd if row]
    idx = np.asarray([[int(r[0]), int(r[1])] for r in rows])
    w = np.asarray([float(r[2]) for r in rows])
    return Graph(vertices, idx, w)


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([
                v if isinstance(v, str) else (str(v) if isinstance(v, (int, bool)) else _fmt(v))
                for v in row
            ])


def read_rows_csv(path):
    """Returns (header, rows) with numeric fields parsed back to float."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = []
        for row in rd:
            if not row:
                continue
            parsed = []
            for v in row:
                try:
                    parsed.append(float(v))
                except ValueError:
                    parsed.append(v)
            rows.append(parsed)
    return header, rows


def solve_report_to_dict(report: SolveReport, graph: Graph) -> dict:
    duals = {
        f"{int(i)}-{int(j)}": float(l)
        for (i, j), l in zip(graph.edge_index, report.duals.multipliers)
    }
    return {
        "labeling": report.labeling.tolist(),
        "duals": duals,
        "iterations": int(report.iterations),
        "loss": float(report.loss),
        "lipschitz": float(report.lipschitz),
        "alpha": float(report.alpha),
        "converged": bool(report.converged),
        "kkt": {
            "max_feasibility_violation": report.kkt.max_feasibility_violation,
            "min_dual": report.kkt.min_dual,
            "max_comp_slack": report.kkt.max_comp_slack,
            "stationarity_residual": report.kkt.stationarity_residual,
            "tol": report.kkt.tol,
        },
    }


def solve_report_from_dict(doc: dict, graph: Graph) -> SolveReport:
    lam = np.zeros(graph.n_edges)
    duals = doc["duals"]
    for e, (i, j) in enumerate(graph.edge_index):
        lam[e] = duals[f"{int(i)}-{int(j)}"]
    kkt = KktReport(**doc["kkt"])
    return SolveReport(
        labeling=np.asarray(doc["labeling"], dtype=float),
        duals=DualEdgeState(lam),
        iterations=int(doc["iterations"]),
        loss=float(doc["loss"]),
        lipschitz=float(doc["lipschitz"]),
        kkt=kkt,
        converged=bool(doc["converged"]),
        alpha=float(doc["alpha"]),
    )


def save_solve_report(path, report: SolveReport, graph: Graph) -> None:
    with open(path, "w") as fh:
        json.dump(solve_report_to_dict(report, graph), fh, indent=1)


def load_solve_report(path, graph: Graph) -> SolveReport:
    with open(path) as fh:
        return solve_report_from_dict(json.load(fh), graph)
