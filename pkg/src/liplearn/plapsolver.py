"""Loss-constrained minimization of graph p-seminorms, continuation in p,
and the robustness-performance tradeoff curve.

The inner problem at each p minimizes the mean-measure L^p norm of edge
difference quotients subject to an empirical-loss budget, via a
preconditioned primal step (diagonal curvature metric, merit backtracking)
and a sign-adaptive scalar dual ascent on the budget multiplier. Ratios are
normalized by their maximum before powers are taken, so the arithmetic does
not overflow for any p.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import LabeledDataset
from .exceptions import DivergenceError, InfeasibleBudgetError
from .graph import DatasetPartition, Graph, graph_lipschitz
from .lipsolver import SolveReport, SolverConfig, solve_lipschitz_constrained
from .loss import LossSpec, as_labeling, empirical_loss, project_to_simplex

__all__ = [
    "MarginBudget",
    "ContinuationSchedule",
    "PSolveDiagnostics",
    "PRecord",
    "RobustifyReport",
    "TradeoffPoint",
    "p_seminorm",
    "normalized_seminorm",
    "solve_p_constrained",
    "robustify",
    "tradeoff_curve",
]


@dataclass(frozen=True)
class MarginBudget:
    """Loss budget J* + epsilon for the robustification stage."""

    j_star: float
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.j_star < 0:
            raise ValueError("j_star must be >= 0")

    @property
    def budget(self) -> float:
        return self.j_star + self.epsilon


@dataclass(frozen=True)
class ContinuationSchedule:
    """Increasing p ladder plus the inner-solver configuration.

    ``config.h0`` is the primal step in the diagonal curvature metric (the
    metric itself carries the 1/p scaling of the raw-gradient step).
    ``dual_period`` sets how many primal steps separate multiplier updates.
    """

    p_values: tuple = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    config: SolverConfig = field(default_factory=lambda: SolverConfig(h0=1.0, max_iters=100_000))
    dual_period: int = 100
    stat_tol: float = 1e-8
    feas_tol: float = 1e-9

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_values)
        if any(p <= 1 for p in ps):
            raise ValueError("all p values must exceed 1")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("p values must be strictly increasing")
        object.__setattr__(self, "p_values", ps)


@dataclass(frozen=True)
class PSolveDiagnostics:
    iterations: int
    stationarity: float
    loss: float
    budget: float
    slack: float
    converged: bool


@dataclass(frozen=True)
class PRecord:
    p: float
    seminorm: float
    seminorm_norm: float
    lipschitz: float
    loss: float
    kappa: float


@dataclass
class RobustifyReport:
    records: list
    labeling: np.ndarray
    lipschitz: float
    j_star: float
    epsilon: float
    budget: float


@dataclass(frozen=True)
class TradeoffPoint:
    epsilon: float
    lipschitz: float
    loss: float
    accuracy: float
    confidence: float


def _edge_ratios(graph: Graph, labeling: np.ndarray) -> np.ndarray:
    d = labeling[graph.edge_index[:, 0]] - labeling[graph.edge_index[:, 1]]
    return np.sqrt(np.einsum("ij,ij->i", d, d)) / graph.edge_lengths


def p_seminorm(graph: Graph, labeling: np.ndarray, p: float) -> float:
    """(1/p) sum over both edge orientations of w * (|v_i-v_j|/|X_i-X_j|)^p.

    Edge differences are measured as difference quotients so the seminorm is
    comparable with the per-edge Lipschitz ratios.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    labeling = as_labeling(labeling)
    if labeling.shape[0] != graph.n:
        raise ValueError("labeling size does not match the graph")
    q = _edge_ratios(graph, labeling)
    qmax = q.max(initial=0.0)
    if qmax == 0.0:
        return 0.0
    return float((2.0 / p) * qmax**p * (graph.weights * (q / qmax) ** p).sum())


def normalized_seminorm(graph: Graph, labeling: np.ndarray, p: float) -> float:
    """Mean-measure L^p norm of the edge ratios: (p*S_p / sum_dirs w)^(1/p).

    Non-decreasing in p for a fixed labeling (Jensen), and converging to the
    max edge ratio as p grows; this is the per-p scalar of the continuation
    ladder.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    labeling = as_labeling(labeling)
    q = _edge_ratios(graph, labeling)
    qmax = q.max(initial=0.0)
    if qmax == 0.0:
        return 0.0
    wsum = graph.weights.sum()
    return float(qmax * ((graph.weights / wsum) * (q / qmax) ** p).sum() ** (1.0 / p))


@njit(cache=True)
def _p_project_row(row, buf):
    dy = row.shape[0]
    for t in range(dy):
        buf[t] = row[t]
    buf[:dy].sort()
    css = 0.0
    tau = 0.0
    j = 0
    for t in range(dy - 1, -1, -1):
        j += 1
        css += buf[t]
        cand = (css - 1.0) / j
        if t == 0 or buf[t - 1] <= cand:
            tau = cand
            break
    for t in range(dy):
        val = row[t] - tau
        row[t] = val if val > 0.0 else 0.0


@njit(cache=True)
def _r_and_loss(v, ei, ej, invlen, cmeas, p, acoef, bmat, ycontrib):
    """Normalized p-norm of edge ratios and empirical loss at v."""
    m = ei.shape[0]
    dy = v.shape[1]
    qmax = 0.0
    for e in range(m):
        de2 = 0.0
        for t in range(dy):
            d = v[ei[e], t] - v[ej[e], t]
            de2 += d * d
        q = np.sqrt(de2) * invlen[e]
        if q > qmax:
            qmax = q
    r = 0.0
    if qmax > 0.0:
        fsum = 0.0
        for e in range(m):
            de2 = 0.0
            for t in range(dy):
                d = v[ei[e], t] - v[ej[e], t]
                de2 += d * d
            q = np.sqrt(de2) * invlen[e]
            fsum += cmeas[e] * (q / qmax) ** p
        r = qmax * fsum ** (1.0 / p)
    loss = ycontrib
    n = v.shape[0]
    for i in range(n):
        vn2 = 0.0
        bv = 0.0
        for t in range(dy):
            vn2 += v[i, t] * v[i, t]
            bv += bmat[i, t] * v[i, t]
        loss += 0.5 * acoef[i] * vn2 - bv
    return r, loss


@njit(cache=True)
def _p_kernel(v, kappa_io, ei, ej, w, invlen, cmeas, p, acoef, bmat, ycontrib,
              budget, h0, max_iters, dual_period, stat_tol, feas_tol, project):
    n, dy = v.shape
    m = ei.shape[0]
    g = np.zeros((n, dy))
    gl = np.zeros((n, dy))
    pcond = np.zeros(n)
    row = np.zeros(dy)
    buf = np.zeros(dy)
    vtry = np.zeros((n, dy))
    kappa = kappa_io[0]
    skap = -1.0
    prev_sign = 0
    status = 0
    stat_raw = np.inf
    it = 0
    hcur = h0
    prev_feas = -1.0
    r, loss = _r_and_loss(v, ei, ej, invlen, cmeas, p, acoef, bmat, ycontrib)
    for k in range(1, max_iters + 1):
        it = k
        # gradient of the normalized ratio norm
        qmax = 0.0
        for e in range(m):
            de2 = 0.0
            for t in range(dy):
                d = v[ei[e], t] - v[ej[e], t]
                de2 += d * d
            q = np.sqrt(de2) * invlen[e]
            if q > qmax:
                qmax = q
        for i in range(n):
            pcond[i] = 0.0
            for t in range(dy):
                gl[i, t] = acoef[i] * v[i, t] - bmat[i, t]
                g[i, t] = 0.0
        r = 0.0
        if qmax > 0.0:
            fsum = 0.0
            for e in range(m):
                de2 = 0.0
                for t in range(dy):
                    d = v[ei[e], t] - v[ej[e], t]
                    de2 += d * d
                q = np.sqrt(de2) * invlen[e]
                fsum += cmeas[e] * (q / qmax) ** p
            r = qmax * fsum ** (1.0 / p)
            for e in range(m):
                i = ei[e]
                j = ej[e]
                de2 = 0.0
                for t in range(dy):
                    d = v[i, t] - v[j, t]
                    de2 += d * d
                q = np.sqrt(de2) * invlen[e]
                if q <= 0.0:
                    te = 0.0 if p > 2.0 else cmeas[e] * invlen[e] * invlen[e] / r
                else:
                    te = (cmeas[e] * np.exp((p - 2.0) * (np.log(q) - np.log(r)))
                          * invlen[e] * invlen[e] / r)
                coef = 2.0 * (p - 1.0) * te
                pcond[i] += coef
                pcond[j] += coef
                for t in range(dy):
                    d = v[i, t] - v[j, t]
                    g[i, t] += te * d
                    g[j, t] -= te * d
        loss = ycontrib
        for i in range(n):
            vn2 = 0.0
            bv = 0.0
            for t in range(dy):
                vn2 += v[i, t] * v[i, t]
                bv += bmat[i, t] * v[i, t]
            loss += 0.5 * acoef[i] * vn2 - bv
        stat_raw = 0.0
        statp = 0.0
        reg = 1e-8 * (1.0 if kappa < 1.0 else kappa)
        for i in range(n):
            pc = pcond[i] + kappa * acoef[i] + reg
            for t in range(dy):
                gt = g[i, t] + kappa * gl[i, t]
                g[i, t] = gt
                a = gt if gt >= 0.0 else -gt
                if a > stat_raw:
                    stat_raw = a
                a = a / pc
                if a > statp:
                    statp = a
            pcond[i] = pc
        feas = loss - budget
        kappa_next = kappa
        # periodic dual updates, plus an immediate brake when an unconstrained
        # slide (kappa = 0) crosses the loss boundary: small problems
        # equilibrate much faster than the dual period
        crossing = feas > 0.0 and prev_feas <= 0.0 and kappa == 0.0
        prev_feas = feas
        if k % dual_period == 0 or crossing:
            if skap < 0.0:
                curv = 0.0
                for i in range(n):
                    for t in range(dy):
                        curv += gl[i, t] * gl[i, t] / pcond[i]
                skap = 0.3 / (curv if curv > 1e-300 else 1e-300)
                # cap the initial scale; the sign-adaptive growth recovers
                # quickly when the cap binds (curvature estimates degenerate
                # at points with vanishing loss gradient)
                cap0 = 100.0 * (1.0 + kappa) / (budget if budget > 1.0 else 1.0)
                if skap > cap0:
                    skap = cap0
            sign = 1 if feas > 0.0 else (-1 if feas < 0.0 else 0)
            if sign != 0 and prev_sign != 0:
                skap = skap * 0.5 if sign != prev_sign else skap * 1.2
            prev_sign = sign
            kappa_next = kappa + skap * feas
            if kappa_next < 0.0:
                kappa_next = 0.0
            bscale = 1.0 if budget < 1.0 else budget
            if kappa == 0.0:
                feas_ok = feas <= feas_tol * bscale
            else:
                feas_ok = (feas if feas >= 0.0 else -feas) <= feas_tol * bscale
            scale = 1.0 if kappa < 1.0 else kappa
            if feas_ok and statp <= stat_tol and stat_raw <= 1e-5 * scale:
                status = 1
                break
        # backtracking step on the merit r + kappa*(loss - budget), with the
        # same kappa the gradient was assembled with
        merit = r + kappa * feas
        h = hcur
        accepted = False
        for _ in range(45):
            for i in range(n):
                for t in range(dy):
                    row[t] = v[i, t] - h * g[i, t] / pcond[i]
                if project:
                    _p_project_row(row, buf)
                for t in range(dy):
                    vtry[i, t] = row[t]
            r_t, loss_t = _r_and_loss(vtry, ei, ej, invlen, cmeas, p, acoef,
                                      bmat, ycontrib)
            if r_t + kappa * (loss_t - budget) <= merit + 1e-14 * (1.0 + merit):
                accepted = True
                break
            h *= 0.5
        if not accepted:
            status = 2
            break
        hcur = h * 2.0 if h * 2.0 < h0 else h0
        for i in range(n):
            for t in range(dy):
                v[i, t] = vtry[i, t]
        kappa = kappa_next
        if not np.isfinite(loss) or loss > 1e12:
            status = 3
            break
    kappa_io[0] = kappa
    feas = loss - budget
    return it, status, stat_raw, loss, feas


def _constant_fast_path(graph, partition, dataset, budget, spec, project):
    """A constant labeling is the exact seminorm minimizer whenever one fits
    the budget; prefer the maximum-entropy constant for simplex outputs."""
    n, dy = graph.n, dataset.dim_y
    if project:
        uniform = np.full((n, dy), 1.0 / dy)
        if empirical_loss(partition, dataset, uniform, spec) <= budget + 1e-12:
            return uniform
    mean = np.tile(dataset.y.mean(axis=0), (n, 1))
    if project:
        mean = project_to_simplex(mean)
    if empirical_loss(partition, dataset, mean, spec) <= budget + 1e-12:
        return mean
    return None


def solve_p_constrained(graph: Graph, partition: DatasetPartition,
                        dataset: LabeledDataset, p: float, budget: MarginBudget,
                        spec: LossSpec, config: SolverConfig,
                        init: np.ndarray, init_kappa: float | None = None,
                        dual_period: int = 100, stat_tol: float = 1e-8,
                        feas_tol: float = 1e-9):
    """Minimize the p-seminorm subject to loss <= budget.

    Returns (labeling, kappa, diagnostics). The multiplier is zero exactly
    when a constant labeling fits the budget; otherwise the loss lands on
    the budget boundary (complementary slackness).
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    b = budget.budget
    floor_labeling = partition.cell_means(dataset)
    if config.project_to_y:
        floor_labeling = project_to_simplex(floor_labeling)
    floor = empirical_loss(partition, dataset, floor_labeling, spec)
    if floor > b + 1e-9:
        raise InfeasibleBudgetError(
            f"loss budget {b:.6g} is below the unconstrained minimum {floor:.6g}"
        )
    const = _constant_fast_path(graph, partition, dataset, b, spec,
                                config.project_to_y)
    if const is not None:
        diag = PSolveDiagnostics(0, 0.0, empirical_loss(partition, dataset, const, spec),
                                 b, 0.0, True)
        return const, 0.0, diag

    v = as_labeling(init).copy()
    if v.shape != (graph.n, dataset.dim_y):
        raise ValueError("init labeling has the wrong shape")
    if config.project_to_y:
        v = project_to_simplex(v)
    if empirical_loss(partition, dataset, v, spec) > b + 1e-9:
        v = floor_labeling.copy()

    counts = partition.cell_counts()
    acoef = (2.0 / dataset.n) * counts
    bmat = (2.0 / dataset.n) * partition.label_sums(dataset)
    ycontrib = float(np.einsum("ij,ij->", dataset.y, dataset.y) / dataset.n)
    wsum = graph.weights.sum()
    if init_kappa is None:
        # least-squares fit of the stationarity balance at the start point
        gl = acoef[:, None] * v - bmat
        gr = _ratio_norm_grad(graph, v, p)
        denom = float(np.einsum("ij,ij->", gl, gl))
        kappa0 = max(0.0, -float(np.einsum("ij,ij->", gr, gl)) / max(denom, 1e-300))
    else:
        kappa0 = max(0.0, float(init_kappa))
    kio = np.array([kappa0])
    it, status, stat_raw, loss, feas = _p_kernel(
        v, kio, np.ascontiguousarray(graph.edge_index[:, 0]),
        np.ascontiguousarray(graph.edge_index[:, 1]), graph.weights,
        1.0 / graph.edge_lengths, graph.weights / wsum, float(p), acoef, bmat,
        ycontrib, b, config.h0, config.max_iters, dual_period, stat_tol,
        feas_tol, config.project_to_y,
    )
    if status == 3:
        raise DivergenceError("p-seminorm iteration diverged; reduce the step size")
    kappa = float(kio[0])
    loss = empirical_loss(partition, dataset, v, spec)
    if loss > b:
        # exact pullback onto the budget boundary along the segment to the
        # (feasible) unconstrained minimizer; loss is quadratic on segments
        v = _restore_feasibility(partition, dataset, v, floor_labeling, b, spec)
        loss = empirical_loss(partition, dataset, v, spec)
    feas = loss - b
    diag = PSolveDiagnostics(
        iterations=it,
        stationarity=float(stat_raw),
        loss=float(loss),
        budget=b,
        slack=float(abs(kappa * feas)),
        converged=status == 1,
    )
    return v, kappa, diag


def _restore_feasibility(partition, dataset, v, anchor, budget, spec):
    """Smallest move along v -> anchor making the loss hit the budget."""
    assign = partition.assignment
    n = dataset.n
    dv = v[assign] - dataset.y
    da = anchor[assign] - v[assign]
    c = float(np.einsum("ij,ij->", dv, dv) / n) - budget
    bq = 2.0 * float(np.einsum("ij,ij->", dv, da) / n)
    aq = float(np.einsum("ij,ij->", da, da) / n)
    if c <= 0:
        return v
    if aq <= 0:
        return anchor.copy()
    disc = bq * bq - 4.0 * aq * c
    theta = 1.0 if disc < 0 else (-bq - np.sqrt(disc)) / (2.0 * aq)
    theta = min(max(theta, 0.0), 1.0)
    return v + theta * (anchor - v)


def _ratio_norm_grad(graph, v, p):
    ei, ej = graph.edge_index[:, 0], graph.edge_index[:, 1]
    d = v[ei] - v[ej]
    q = np.sqrt(np.einsum("ij,ij->i", d, d)) / graph.edge_lengths
    g = np.zeros_like(v)
    qmax = q.max(initial=0.0)
    if qmax == 0.0:
        return g
    wsum = graph.weights.sum()
    cmeas = graph.weights / wsum
    z = q / qmax
    r = qmax * (cmeas * z**p).sum() ** (1.0 / p)
    with np.errstate(divide="ignore"):
        ratio = np.exp((p - 2.0) * (np.log(np.maximum(q, 1e-300)) - np.log(r)))
    ratio[q == 0.0] = 0.0 if p > 2 else 1.0
    t = cmeas * ratio / (graph.edge_lengths**2 * r)
    contrib = t[:, None] * d
    np.add.at(g, ei, contrib)
    np.subtract.at(g, ej, contrib)
    return g


def robustify(graph: Graph, partition: DatasetPartition, dataset: LabeledDataset,
              alpha: float, epsilon: float, spec: LossSpec,
              schedule: ContinuationSchedule,
              reference: SolveReport | None = None,
              init_labeling: np.ndarray | None = None,
              init_kappa: float | None = None) -> RobustifyReport:
    """Estimate the smallest reachable Lipschitz constant under a loss margin
    by continuation in p, warm-starting each stage from the previous one.

    ``reference`` may carry a precomputed constrained solve at ``alpha``
    (it is computed here otherwise); its loss defines the budget J* + epsilon.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if reference is None:
        reference = solve_lipschitz_constrained(
            graph, partition, dataset, alpha, spec, schedule.config)
    budget = MarginBudget(reference.loss, epsilon)
    v = as_labeling(init_labeling).copy() if init_labeling is not None \
        else reference.labeling.copy()
    kappa = init_kappa
    records = []
    for p in schedule.p_values:
        v, kappa, diag = solve_p_constrained(
            graph, partition, dataset, p, budget, spec, schedule.config, v,
            init_kappa=kappa, dual_period=schedule.dual_period,
            stat_tol=schedule.stat_tol, feas_tol=schedule.feas_tol)
        records.append(PRecord(
            p=float(p),
            seminorm=p_seminorm(graph, v, p),
            seminorm_norm=normalized_seminorm(graph, v, p),
            lipschitz=graph_lipschitz(graph, v),
            loss=diag.loss,
            kappa=kappa,
        ))
    return RobustifyReport(
        records=records,
        labeling=v,
        lipschitz=graph_lipschitz(graph, v),
        j_star=reference.loss,
        epsilon=epsilon,
        budget=budget.budget,
    )


def tradeoff_curve(graph: Graph, partition: DatasetPartition,
                   dataset: LabeledDataset, alpha: float, eps_grid,
                   spec: LossSpec, schedule: ContinuationSchedule,
                   testset: LabeledDataset | None = None):
    """One robustify run per margin value, warm-starting along the grid.

    Returns (points, reports): TradeoffPoint rows ordered by epsilon, with
    accuracy/confidence evaluated on ``testset`` (the training data when
    absent), plus the per-epsilon RobustifyReports.
    """
    eps_grid = [float(e) for e in eps_grid]
    if any(e < 0 for e in eps_grid):
        raise ValueError("margins must be >= 0")
    if any(b <= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("margin grid must be strictly increasing")
    from .evaluation import evaluate  # deferred to keep import graph acyclic

    evalset = testset if testset is not None else dataset
    reference = solve_lipschitz_constrained(
        graph, partition, dataset, alpha, spec, schedule.config)
    points, reports = [], []
    v = None
    kappa = None
    for eps in eps_grid:
        rep = robustify(graph, partition, dataset, alpha, eps, spec, schedule,
                        reference=reference, init_labeling=v, init_kappa=kappa)
        v, kappa = rep.labeling, rep.records[-1].kappa
        metrics = evaluate(graph.vertices, rep.labeling, evalset, spec)
        points.append(TradeoffPoint(
            epsilon=eps,
            lipschitz=rep.lipschitz,
            loss=rep.records[-1].loss,
            accuracy=metrics.accuracy,
            confidence=metrics.mean_confidence,
        ))
        reports.append(rep)
    return points, reports
