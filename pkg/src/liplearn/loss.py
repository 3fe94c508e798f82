"""Strictly convex sample loss, its gradient, and the partition-weighted
empirical loss of a labeling. Also hosts output-space helpers (simplex
projection, certified Lipschitz constants of the loss)."""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .data import LabeledDataset
from .graph import DatasetPartition

__all__ = [
    "LossSpec",
    "sample_loss",
    "sample_loss_grad",
    "empirical_loss",
    "project_to_simplex",
    "as_labeling",
]


def as_labeling(values: np.ndarray) -> np.ndarray:
    """Coerce to a (n, dim_y) float array; 1-d input is treated as scalar outputs."""
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


@dataclass(frozen=True)
class LossSpec:
    """Loss choice plus a certified Lipschitz constant of v -> loss(v, y) on Y x Y.

    Only the squared Euclidean loss is implemented; its gradient 2(v - y) has
    norm at most twice the diameter of Y, so ``lipschitz_const`` must be
    2 * diam(Y) computed from the declared output space, not from data.
    """

    kind: str = "squared"
    lipschitz_const: float = 2.0 * sqrt(2.0)

    def __post_init__(self):
        if self.kind != "squared":
            raise ValueError(f"unsupported loss kind {self.kind!r}")
        if self.lipschitz_const <= 0:
            raise ValueError("lipschitz_const must be positive")

    @staticmethod
    def squared_for_simplex(dim_y: int = 2) -> "LossSpec":
        """Squared loss on the probability simplex (diameter sqrt(2) for dim_y >= 2)."""
        diam = sqrt(2.0) if dim_y >= 2 else 0.0
        return LossSpec("squared", 2.0 * diam if diam else 2.0)

    @staticmethod
    def squared_for_box(low, high) -> "LossSpec":
        diam = float(np.linalg.norm(np.asarray(high, float) - np.asarray(low, float)))
        if diam <= 0:
            raise ValueError("output box must have positive diameter")
        return LossSpec("squared", 2.0 * diam)


def sample_loss(v: np.ndarray, y: np.ndarray, spec: LossSpec) -> float:
    """Squared Euclidean loss |v - y|^2."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if v.shape != y.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {y.shape}")
    d = v - y
    return float(np.dot(d.ravel(), d.ravel()))


def sample_loss_grad(v: np.ndarray, y: np.ndarray, spec: LossSpec) -> np.ndarray:
    """Gradient of the loss in its first argument: 2(v - y)."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if v.shape != y.shape:
        raise ValueError(f"shape mismatch: {v.shape} vs {y.shape}")
    return 2.0 * (v - y)


def empirical_loss(partition: DatasetPartition, dataset: LabeledDataset,
                   labeling: np.ndarray, spec: LossSpec) -> float:
    """Partition-weighted loss: sum_i sum_{s in cell i} (1/N) |v_i - y_s|^2."""
    labeling = as_labeling(labeling)
    if partition.n_samples != dataset.n:
        raise ValueError("partition and dataset sample counts differ")
    if labeling.shape[0] != partition.n_vertices:
        raise ValueError("labeling size does not match the partition's vertex count")
    if labeling.shape[1] != dataset.dim_y:
        raise ValueError("labeling and dataset output dimensions differ")
    diff = labeling[partition.assignment] - dataset.y
    return float(np.einsum("ij,ij->", diff, diff) / dataset.n)


def project_to_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    v = as_labeling(values)
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    positions = np.arange(1, v.shape[1] + 1)
    cond = u - css / positions > 0
    rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - tau[:, None], 0.0)
