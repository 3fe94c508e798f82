"""Primal-dual solver for empirical loss minimization under pairwise edge
Lipschitz constraints, with first-order (KKT) certification.

The training dynamics alternates a gradient step on the labeling with a
projected ascent step on per-edge multipliers. A Newton-type active-set
refinement can tighten the first-order residuals once the dynamics has
localized the active constraints; it is verified against the exact
optimality conditions and discarded whenever certification fails, so the
dynamics remains the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.sparse import bmat as sparse_bmat
from scipy.sparse import coo_matrix, diags, identity
from scipy.sparse.linalg import spsolve

from .data import LabeledDataset
from .exceptions import DivergenceError
from .graph import DatasetPartition, Graph, graph_lipschitz
from .loss import LossSpec, as_labeling, empirical_loss, project_to_simplex

__all__ = [
    "DualEdgeState",
    "SolverConfig",
    "KktReport",
    "SolveReport",
    "lagrangian",
    "primal_grad",
    "dual_grad",
    "check_kkt",
    "solve_lipschitz_constrained",
]

# status codes returned by the iteration kernel
_RUNNING, _KKT_PASS, _STEP_TOL, _DIVERGED = 0, 1, 2, 3


@dataclass
class DualEdgeState:
    """Nonnegative multipliers, one per stored undirected edge."""

    multipliers: np.ndarray

    def __post_init__(self):
        self.multipliers = np.asarray(self.multipliers, dtype=float).ravel()
        if (self.multipliers < 0).any():
            raise ValueError("edge multipliers must be nonnegative")

    @staticmethod
    def zeros(n_edges: int) -> "DualEdgeState":
        return DualEdgeState(np.zeros(n_edges))


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, schedule, tolerances and iteration limits.

    ``h0`` with the constant schedule is the baseline realization; the
    diminishing schedule uses h(k) = h0 / (1 + gamma*k). Safeguards:
    ``adaptive_cap`` shrinks the primal step whenever the multiplier-weighted
    graph curvature would make h0 unstable, and ``dual_autoscale`` scales the
    per-edge ascent steps from the loss curvature / constraint coupling
    balance. ``seed`` is reserved for randomized restarts; the default
    initializer (cell label means) is deterministic.
    """

    h0: float = 0.05
    step_schedule: str = "constant"
    gamma: float = 0.0
    max_iters: int = 300_000
    primal_tol: float = 1e-12
    dual_tol: float = 1e-12
    kkt_tol: float = 1e-6
    project_to_y: bool = False
    seed: int = 0
    check_every: int = 64
    dual_autoscale: bool = True
    dual_beta: float = 0.5
    dual_cap: float = 100.0
    adaptive_cap: bool = True
    polish: bool = True

    def __post_init__(self):
        if self.h0 <= 0:
            raise ValueError("h0 must be positive")
        if self.step_schedule not in ("constant", "diminishing"):
            raise ValueError(f"unknown step schedule {self.step_schedule!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if min(self.primal_tol, self.dual_tol, self.kkt_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class KktReport:
    """First-order residuals of a (labeling, multipliers) pair at level alpha.

    ``max_feasibility_violation`` and ``max_comp_slack`` are measured on the
    squared constraint |v_i-v_j|^2 - alpha^2 |X_i-X_j|^2; the stationarity
    residual is the sup-norm of the Lagrangian's labeling gradient (projected
    form when the labeling is kept on the simplex).
    """

    max_feasibility_violation: float
    min_dual: float
    max_comp_slack: float
    stationarity_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.max_feasibility_violation <= self.tol
            and self.min_dual >= -self.tol
            and self.max_comp_slack <= self.tol
            and self.stationarity_residual <= self.tol
        )

    def worst(self) -> float:
        return max(
            self.max_feasibility_violation,
            -min(self.min_dual, 0.0),
            self.max_comp_slack,
            self.stationarity_residual,
        )


@dataclass
class SolveReport:
    labeling: np.ndarray
    duals: DualEdgeState
    iterations: int
    loss: float
    lipschitz: float
    kkt: KktReport
    converged: bool
    alpha: float


# -- public operations -------------------------------------------------------

def _edge_sq_diffs(graph: Graph, labeling: np.ndarray) -> np.ndarray:
    d = labeling[graph.edge_index[:, 0]] - labeling[graph.edge_index[:, 1]]
    return np.einsum("ij,ij->i", d, d)


def lagrangian(graph: Graph, partition: DatasetPartition, dataset: LabeledDataset,
               labeling: np.ndarray, duals: DualEdgeState, alpha: float,
               spec: LossSpec) -> float:
    """Empirical loss plus the multiplier-weighted edge constraint terms.

    Each undirected edge contributes lambda * w * (|v_i-v_j|^2 - alpha^2 |X_i-X_j|^2)
    once (the two orientations with the 1/2 factor collapse to this).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    labeling = as_labeling(labeling)
    lam = duals.multipliers
    if lam.shape[0] != graph.n_edges:
        raise ValueError("dual state size does not match the edge count")
    de2 = _edge_sq_diffs(graph, labeling)
    resid = de2 - alpha**2 * graph.edge_lengths**2
    return empirical_loss(partition, dataset, labeling, spec) + float(
        np.dot(lam * graph.weights, resid)
    )


def primal_grad(graph: Graph, partition: DatasetPartition, dataset: LabeledDataset,
                labeling: np.ndarray, duals: DualEdgeState,
                spec: LossSpec) -> np.ndarray:
    """Labeling gradient of the Lagrangian: multiplier-weighted graph
    smoothing plus the partition-weighted loss gradient.

    Row i equals 2 sum_j lam_ij w_ij (v_i - v_j) + sum_{s in cell i} theta * 2(v_i - y_s);
    the leading 2 on the smoothing term is what exact differentiation of the
    edge terms produces (it can be absorbed into the multipliers).
    """
    labeling = as_labeling(labeling)
    lam = duals.multipliers
    if lam.shape[0] != graph.n_edges:
        raise ValueError("dual state size does not match the edge count")
    if labeling.shape != (graph.n, dataset.dim_y):
        raise ValueError("labeling shape does not match graph/dataset")
    ei, ej = graph.edge_index[:, 0], graph.edge_index[:, 1]
    d = labeling[ei] - labeling[ej]
    contrib = (2.0 * lam * graph.weights)[:, None] * d
    g = np.zeros_like(labeling)
    np.add.at(g, ei, contrib)
    np.subtract.at(g, ej, contrib)
    counts = partition.cell_counts()
    g += (2.0 / dataset.n) * (counts[:, None] * labeling - partition.label_sums(dataset))
    return g


def dual_grad(graph: Graph, labeling: np.ndarray, alpha: float) -> np.ndarray:
    """Per-edge ascent direction: (w/2) (|v_i-v_j|^2 - alpha^2 |X_i-X_j|^2)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    labeling = as_labeling(labeling)
    de2 = _edge_sq_diffs(graph, labeling)
    return 0.5 * graph.weights * (de2 - alpha**2 * graph.edge_lengths**2)


def check_kkt(graph: Graph, partition: DatasetPartition, dataset: LabeledDataset,
              labeling: np.ndarray, duals: DualEdgeState, alpha: float,
              spec: LossSpec, tol: float,
              project_to_y: bool = False) -> KktReport:
    """Evaluate all four first-order residuals of the constrained problem."""
    labeling = as_labeling(labeling)
    lam = duals.multipliers
    de2 = _edge_sq_diffs(graph, labeling)
    resid = de2 - alpha**2 * graph.edge_lengths**2
    feas = float(max(resid.max(initial=0.0), 0.0))
    slack = float((lam * np.abs(resid)).max(initial=0.0))
    g = primal_grad(graph, partition, dataset, labeling, duals, spec)
    if alpha == 0.0:
        # constraints force a constant labeling and their gradients vanish
        # there, so stationarity is measured on the constant-map subspace
        stat = float(np.abs(g.mean(axis=0)).max())
    elif project_to_y:
        stat = float(np.abs(labeling - project_to_simplex(labeling - g)).max())
    else:
        stat = float(np.abs(g).max())
    return KktReport(feas, float(lam.min(initial=0.0)), slack, stat, tol)


# -- iteration kernel ---------------------------------------------------------

@njit(cache=True)
def _project_row_simplex(row, buf):
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
def _pd_kernel(v, lam, ei, ej, w, a2l2, acoef, bmat, sdual, h0, gamma, k0,
               max_iters, check_every, kkt_tol, primal_tol, dual_tol,
               project, adaptive_cap, ycontrib):
    n, dy = v.shape
    m = ei.shape[0]
    g = np.zeros((n, dy))
    wdeg = np.zeros(n)
    row = np.zeros(dy)
    buf = np.zeros(dy)
    acoef_max = acoef.max()
    feas = np.inf
    slack = np.inf
    stat = np.inf
    status = _RUNNING
    it = 0
    for k in range(1, max_iters + 1):
        it = k
        for i in range(n):
            for t in range(dy):
                g[i, t] = acoef[i] * v[i, t] - bmat[i, t]
            wdeg[i] = 0.0
        dlmax = 0.0
        for e in range(m):
            i = ei[e]
            j = ej[e]
            lw = lam[e] * w[e]
            wdeg[i] += lw
            wdeg[j] += lw
            c = 2.0 * lw
            de2 = 0.0
            for t in range(dy):
                d = v[i, t] - v[j, t]
                de2 += d * d
                g[i, t] += c * d
                g[j, t] -= c * d
            gd = 0.5 * w[e] * (de2 - a2l2[e])
            ln = lam[e] + sdual[e] * gd
            if ln < 0.0:
                ln = 0.0
            dl = ln - lam[e]
            if dl < 0.0:
                dl = -dl
            if dl > dlmax:
                dlmax = dl
            lam[e] = ln
        h = h0 if gamma == 0.0 else h0 / (1.0 + gamma * (k0 + k))
        if adaptive_cap:
            wmax = 0.0
            for i in range(n):
                if wdeg[i] > wmax:
                    wmax = wdeg[i]
            cap = 1.8 / (acoef_max + 4.0 * wmax)
            if cap < h:
                h = cap
        dvmax = 0.0
        for i in range(n):
            for t in range(dy):
                row[t] = v[i, t] - h * g[i, t]
            if project:
                _project_row_simplex(row, buf)
            for t in range(dy):
                dv = row[t] - v[i, t]
                if dv < 0.0:
                    dv = -dv
                if dv > dvmax:
                    dvmax = dv
                v[i, t] = row[t]
        if dvmax <= primal_tol and dlmax <= dual_tol:
            status = _STEP_TOL
        if k % check_every == 0 or status != _RUNNING or k == max_iters:
            feas = 0.0
            slack = 0.0
            lagr = ycontrib
            for i in range(n):
                vn2 = 0.0
                for t in range(dy):
                    g[i, t] = acoef[i] * v[i, t] - bmat[i, t]
                    vn2 += v[i, t] * v[i, t]
                lagr += 0.5 * acoef[i] * vn2
                for t in range(dy):
                    lagr -= bmat[i, t] * v[i, t]
            for e in range(m):
                i = ei[e]
                j = ej[e]
                c = 2.0 * lam[e] * w[e]
                de2 = 0.0
                for t in range(dy):
                    d = v[i, t] - v[j, t]
                    de2 += d * d
                    g[i, t] += c * d
                    g[j, t] -= c * d
                resid = de2 - a2l2[e]
                lagr += lam[e] * w[e] * resid
                if resid > feas:
                    feas = resid
                ar = resid if resid >= 0.0 else -resid
                cs = lam[e] * ar
                if cs > slack:
                    slack = cs
            stat = 0.0
            if project:
                for i in range(n):
                    for t in range(dy):
                        row[t] = v[i, t] - g[i, t]
                    _project_row_simplex(row, buf)
                    for t in range(dy):
                        r = v[i, t] - row[t]
                        if r < 0.0:
                            r = -r
                        if r > stat:
                            stat = r
            else:
                for i in range(n):
                    for t in range(dy):
                        r = g[i, t]
                        if r < 0.0:
                            r = -r
                        if r > stat:
                            stat = r
            if not (np.isfinite(lagr) and np.isfinite(stat)) or lagr > 1e12:
                status = _DIVERGED
                break
            if feas <= kkt_tol and slack <= kkt_tol and stat <= kkt_tol:
                status = _KKT_PASS
                break
            if status == _STEP_TOL:
                break
    return it, status, feas, slack, stat


# -- active-set refinement ----------------------------------------------------

def _newton_fixed_set(ws, v, lam, idx, target, max_steps=30):
    """Damped Newton on the stationarity+activity system for a fixed edge set.

    Returns (v, lam_on_idx, residual_norm). Multipliers may go negative here;
    the caller decides whether the set must shrink.
    """
    n, dy, ei, ej, w, a2l2, acoef, bmat = (
        ws["n"], ws["dy"], ws["ei"], ws["ej"], ws["w"], ws["a2l2"],
        ws["acoef"], ws["bmat"],
    )
    base = np.arange(n * dy).reshape(n, dy)

    def residuals(v, lam_full):
        d = v[ei] - v[ej]
        rv = acoef[:, None] * v - bmat
        if idx.size:
            cc = (2.0 * lam_full[idx] * w[idx])[:, None] * d[idx]
            np.add.at(rv, ei[idx], cc)
            np.subtract.at(rv, ej[idx], cc)
        de2 = np.einsum("ij,ij->i", d[idx], d[idx]) if idx.size else np.zeros(0)
        ra = de2 - a2l2[idx]
        return rv, ra, d

    rv, ra, d = residuals(v, lam)
    rnorm = max(np.abs(rv).max(), np.abs(ra).max(initial=0.0))
    for _ in range(max_steps):
        if rnorm < target:
            break
        rho = max(1e-12, min(1e-6, 1e-3 * rnorm))
        ma = idx.size
        rows = [base.ravel()]
        cols = [base.ravel()]
        vals = [np.repeat(acoef, dy) + rho]
        if ma:
            c = 2.0 * lam[idx] * w[idx]
            for t in range(dy):
                bi, bj = base[ei[idx], t], base[ej[idx], t]
                rows += [bi, bj, bi, bj]
                cols += [bi, bj, bj, bi]
                vals += [c, c, -c, -c]
        h_mat = coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * dy, n * dy),
        )
        if ma:
            r2, c2, v2 = [], [], []
            for t in range(dy):
                r2 += [np.arange(ma)] * 2
                c2 += [base[ei[idx], t], base[ej[idx], t]]
                v2 += [2.0 * d[idx, t], -2.0 * d[idx, t]]
            cmat = coo_matrix(
                (np.concatenate(v2), (np.concatenate(r2), np.concatenate(c2))),
                shape=(ma, n * dy),
            ).tocsr()
            jac = sparse_bmat(
                [[h_mat, (diags(w[idx]) @ cmat).T], [cmat, -rho * identity(ma)]],
                format="csc",
            )
            rhs = np.concatenate([rv.ravel(), ra])
        else:
            jac = h_mat.tocsc()
            rhs = rv.ravel()
        try:
            delta = spsolve(jac, -rhs)
        except Exception:
            return v, lam, rnorm
        if not np.isfinite(delta).all():
            return v, lam, rnorm
        dv = delta[: n * dy].reshape(n, dy)
        dl = delta[n * dy :]
        step = 1.0
        improved = False
        while step > 1e-7:
            v_try = v + step * dv
            lam_try = lam.copy()
            if ma:
                lam_try[idx] = lam[idx] + step * dl
            rv_t, ra_t, d_t = residuals(v_try, lam_try)
            rn = max(np.abs(rv_t).max(), np.abs(ra_t).max(initial=0.0))
            if rn <= (1.0 - 1e-4 * step) * rnorm or rn < target:
                v, lam, rv, ra, d, rnorm = v_try, lam_try, rv_t, ra_t, d_t, rn
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return v, lam, rnorm


def _barrier_polish(ws, v_dyn, kkt_tol, max_newton=200):
    """Certify via a short log-barrier path when the active set is degenerate.

    Minimizes loss - tau * sum_e log(alpha^2 L_e^2 - |v_i-v_j|^2) for a
    decreasing tau, by damped Newton. The implied multipliers tau/(slack*w)
    are strictly positive, feasibility is strict, and the complementary
    slackness residual equals tau/w, so the final tau is chosen to sit below
    the requested tolerance. Costs a small optimality bias of order
    m*tau in the loss, which the caller's certificate check tolerates.
    """
    n, dy, ei, ej, w, a2l2, acoef, bmat = (
        ws["n"], ws["dy"], ws["ei"], ws["ej"], ws["w"], ws["a2l2"],
        ws["acoef"], ws["bmat"],
    )
    m = ei.shape[0]
    base = np.arange(n * dy).reshape(n, dy)
    wmin = w.min()
    tau_final = 0.2 * kkt_tol * wmin
    # any constant labeling is strictly feasible; use the global label mean
    mean = np.tile(bmat.sum(axis=0) / max(acoef.sum(), 1e-300), (n, 1))

    def slacks(v):
        d = v[ei] - v[ej]
        return a2l2 - np.einsum("ij,ij->i", d, d), d

    v = v_dyn.copy()
    s, d = slacks(v)
    if s.min() <= 0.0:
        # pull toward the strictly feasible constant until well inside
        de2 = a2l2 - s
        shrink2 = np.min(0.9 * a2l2 / np.maximum(de2, 1e-300))
        theta = 1.0 - np.sqrt(min(shrink2, 1.0))
        v = (1.0 - theta) * v + theta * mean
        s, d = slacks(v)
        if s.min() <= 0.0:
            v = mean.copy()
            s, d = slacks(v)

    def phi(v, s, tau):
        lossish = 0.5 * float(np.einsum("i,ij,ij->", acoef, v, v)) - float(
            np.einsum("ij,ij->", bmat, v)
        )
        return lossish - tau * float(np.log(s).sum())

    tau = max(tau_final, 1e-2)
    newtons = 0
    while True:
        for _ in range(60):
            if newtons >= max_newton:
                return None
            newtons += 1
            coef1 = 2.0 * tau / s
            grad = acoef[:, None] * v - bmat
            contrib = coef1[:, None] * d
            np.add.at(grad, ei, contrib)
            np.subtract.at(grad, ej, contrib)
            gnorm = np.abs(grad).max()
            if gnorm <= max(0.25 * kkt_tol, 1e-3 * tau):
                break
            rows = [base.ravel()]
            cols = [base.ravel()]
            vals = [np.repeat(acoef, dy)]
            coef2 = 4.0 * tau / s**2
            for t in range(dy):
                bi, bj = base[ei, t], base[ej, t]
                rows += [bi, bj, bi, bj]
                cols += [bi, bj, bj, bi]
                vals += [coef1, coef1, -coef1, -coef1]
                for u in range(dy):
                    cu = coef2 * d[:, t] * d[:, u]
                    bju = base[ej, u]
                    biu = base[ei, u]
                    rows += [bi, bj, bi, bj]
                    cols += [biu, bju, bju, biu]
                    vals += [cu, cu, -cu, -cu]
            hess = coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n * dy, n * dy),
            ).tocsc()
            try:
                step = spsolve(hess, -grad.ravel()).reshape(n, dy)
            except Exception:
                return None
            if not np.isfinite(step).all():
                return None
            # largest step keeping all slacks positive, then backtrack on phi
            t_max = 1.0
            dstep = step[ei] - step[ej]
            a_q = np.einsum("ij,ij->i", dstep, dstep)
            b_q = 2.0 * np.einsum("ij,ij->i", d, dstep)
            # s(t) = s - b_q t - a_q t^2 > 0
            for e in np.flatnonzero(a_q * t_max**2 + b_q * t_max >= 0.99 * s):
                aa, bb, ss = a_q[e], b_q[e], 0.99 * s[e]
                if aa <= 0.0:
                    if bb > 0.0:
                        t_max = min(t_max, ss / bb)
                    continue
                disc = bb * bb + 4.0 * aa * ss
                t_max = min(t_max, (-bb + np.sqrt(disc)) / (2.0 * aa))
            t_step = min(1.0, 0.995 * t_max)
            cur = phi(v, s, tau)
            gdot = float(np.einsum("ij,ij->", grad, step))
            ok = False
            for _ in range(50):
                v_try = v + t_step * step
                s_try, d_try = slacks(v_try)
                if s_try.min() > 0.0 and phi(v_try, s_try, tau) <= cur + 1e-4 * t_step * gdot:
                    ok = True
                    break
                t_step *= 0.5
            if not ok:
                return None
            v, s, d = v_try, s_try, d_try
        if tau <= tau_final:
            break
        tau = max(tau_final, 0.1 * tau)
    lam = tau / (np.maximum(s, 1e-300) * w)
    return v, lam


def _polish(ws, v0, lam0, kkt_tol):
    """Active-set refinement with exact re-verification.

    Starts from the dynamics' multiplier support, solves the fixed-set
    stationarity system, then drops converged-negative multipliers or adds
    violated edges one batch at a time. Returns None unless the refined pair
    certifies strictly below the requested tolerance.
    """
    lam_scale = max(float(lam0.max(initial=0.0)), 1.0)
    v, lam = v0.copy(), lam0.copy()
    active = lam > 1e-5 * lam_scale
    target = min(1e-10, 0.01 * kkt_tol)
    for _ in range(25):
        idx = np.flatnonzero(active)
        lam = np.where(active, lam, 0.0)
        v, lam, rnorm = _newton_fixed_set(ws, v, lam, idx, target)
        # converged-negative multipliers flag a wrong set even when the
        # equality system stalls (it is infeasible while the set is too big)
        neg = active & (lam < 0.0)
        if neg.any():
            active &= ~neg
            lam[neg] = 0.0
            continue
        if rnorm >= target:
            return None
        d = v[ws["ei"]] - v[ws["ej"]]
        resid = np.einsum("ij,ij->i", d, d) - ws["a2l2"]
        violated = (~active) & (resid > 0.5 * target)
        if violated.any():
            active |= violated
            continue
        return v, np.maximum(lam, 0.0)
    return None


# -- driver -------------------------------------------------------------------

def _workspace(graph, partition, dataset, alpha):
    counts = partition.cell_counts()
    return {
        "n": graph.n,
        "dy": dataset.dim_y,
        "ei": np.ascontiguousarray(graph.edge_index[:, 0]),
        "ej": np.ascontiguousarray(graph.edge_index[:, 1]),
        "w": np.ascontiguousarray(graph.weights),
        "a2l2": alpha**2 * graph.edge_lengths**2,
        "acoef": (2.0 / dataset.n) * counts,
        "bmat": (2.0 / dataset.n) * partition.label_sums(dataset),
        "counts": counts,
    }


def _dual_steps(ws, config, alpha):
    if not config.dual_autoscale:
        return np.full(ws["w"].shape, config.h0)
    counts = ws["counts"]
    nonempty = counts[counts > 0]
    mu = 2.0 * (nonempty.min() if nonempty.size else 1.0) / max(counts.sum(), 1)
    coupling = 2.0 * ws["w"] ** 2 * np.maximum(ws["a2l2"], 1e-300)
    return np.minimum(config.dual_cap, config.dual_beta * mu / coupling)


def solve_lipschitz_constrained(graph: Graph, partition: DatasetPartition,
                                dataset: LabeledDataset, alpha: float,
                                spec: LossSpec, config: SolverConfig,
                                init_labeling: np.ndarray | None = None,
                                init_duals: DualEdgeState | None = None) -> SolveReport:
    """Run the primal-dual dynamics from the per-cell label means (or a warm
    start) and certify the result.

    The labeling is stepped against the Lagrangian gradient, the edge
    multipliers by projected ascent, per the configured step schedule.
    Convergence is declared only when the first-order certificate passes at
    ``config.kkt_tol``. Raises :class:`DivergenceError` when the iteration
    blows up (retry with a smaller h0).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if partition.n_vertices != graph.n:
        raise ValueError("partition and graph disagree on the vertex count")

    if alpha == 0.0:
        return _solve_alpha_zero(graph, partition, dataset, spec, config)

    ws = _workspace(graph, partition, dataset, alpha)
    if init_labeling is not None:
        v = as_labeling(init_labeling).copy()
        if v.shape != (graph.n, dataset.dim_y):
            raise ValueError("init labeling has the wrong shape")
    else:
        v = partition.cell_means(dataset)
    if config.project_to_y:
        v = project_to_simplex(v)
    lam = (init_duals.multipliers.copy() if init_duals is not None
           else np.zeros(graph.n_edges))
    if lam.shape[0] != graph.n_edges:
        raise ValueError("init duals have the wrong size")

    sdual = _dual_steps(ws, config, alpha)
    ycontrib = float(np.einsum("ij,ij->", dataset.y, dataset.y) / dataset.n)

    iters_done = 0
    status = _RUNNING
    polish_gate = 5e-2
    while iters_done < config.max_iters:
        chunk = min(max(config.check_every, 4096), config.max_iters - iters_done)
        it, status, feas, slack, stat = _pd_kernel(
            v, lam, ws["ei"], ws["ej"], ws["w"], ws["a2l2"], ws["acoef"],
            ws["bmat"], sdual, config.h0,
            config.gamma if config.step_schedule == "diminishing" else 0.0,
            iters_done, chunk, config.check_every, config.kkt_tol,
            config.primal_tol, config.dual_tol, config.project_to_y,
            config.adaptive_cap, ycontrib,
        )
        iters_done += it
        if status == _DIVERGED:
            raise DivergenceError(
                f"primal-dual iteration diverged after {iters_done} steps; "
                f"retry with a smaller h0 (current {config.h0})"
            )
        if status in (_KKT_PASS, _STEP_TOL):
            break
        worst = max(feas, slack, stat)
        if config.polish and worst <= polish_gate:
            refined = _polish(ws, v, lam, config.kkt_tol)
            if refined is None:
                refined = _barrier_polish(ws, v, config.kkt_tol)
            if refined is not None:
                v_ref, lam_ref = refined
                if _accept_polish(graph, partition, dataset, v_ref, lam_ref,
                                  alpha, spec, config):
                    v, lam = v_ref, lam_ref
                    status = _KKT_PASS
                    break
            polish_gate = worst / 4.0

    duals = DualEdgeState(np.maximum(lam, 0.0))
    labeling = project_to_simplex(v) if config.project_to_y else v
    kkt = check_kkt(graph, partition, dataset, labeling, duals, alpha, spec,
                    config.kkt_tol, project_to_y=config.project_to_y)
    return SolveReport(
        labeling=labeling,
        duals=duals,
        iterations=iters_done,
        loss=empirical_loss(partition, dataset, labeling, spec),
        lipschitz=graph_lipschitz(graph, labeling),
        kkt=kkt,
        converged=kkt.passed,
        alpha=alpha,
    )


def _accept_polish(graph, partition, dataset, v, lam, alpha, spec, config):
    if not np.isfinite(v).all() or lam.min(initial=0.0) < 0:
        return False
    if config.project_to_y:
        # refinement ignores the simplex constraints; only accept interior
        # solutions that already satisfy them to round-off
        if np.abs(v - project_to_simplex(v)).max() > 1e-12:
            return False
    report = check_kkt(graph, partition, dataset, v, DualEdgeState(lam), alpha,
                       spec, config.kkt_tol, project_to_y=config.project_to_y)
    return report.passed


def _solve_alpha_zero(graph, partition, dataset, spec, config):
    """alpha = 0 forces a constant labeling on a connected graph; the optimal
    constant is the global label mean. The squared constraints have vanishing
    gradients there, so the certificate is computed in closed form."""
    mean = dataset.y.mean(axis=0)
    labeling = np.tile(mean, (graph.n, 1))
    if config.project_to_y:
        labeling = project_to_simplex(labeling)
    duals = DualEdgeState.zeros(graph.n_edges)
    kkt = check_kkt(graph, partition, dataset, labeling, duals, 0.0, spec,
                    config.kkt_tol)
    return SolveReport(
        labeling=labeling,
        duals=duals,
        iterations=0,
        loss=empirical_loss(partition, dataset, labeling, spec),
        lipschitz=graph_lipschitz(graph, labeling),
        kkt=kkt,
        converged=kkt.passed,
        alpha=0.0,
    )
