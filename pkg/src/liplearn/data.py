"""Dataset containers, synthetic data generation, IDX ingestion, k-means, splitting."""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IdxFormatError

__all__ = [
    "LabeledDataset",
    "CheckerboardSpec",
    "checkerboard_label",
    "gen_checkerboard",
    "read_idx",
    "write_idx",
    "load_idx_dataset",
    "kmeans",
    "split",
]


@dataclass
class LabeledDataset:
    """Labeled samples with inputs ``x`` (N, dim_x) and outputs ``y`` (N, dim_y).

    ``x_low``/``x_high`` declare the bounding box of the input space; they
    default to the componentwise data range and are used when perturbed
    inputs must be clipped back into the domain.
    """

    x: np.ndarray
    y: np.ndarray
    x_low: np.ndarray = field(default=None)
    x_high: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"sample count mismatch: {self.x.shape[0]} inputs vs {self.y.shape[0]} outputs"
            )
        if self.x.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.x_low is None:
            self.x_low = self.x.min(axis=0)
        else:
            self.x_low = np.asarray(self.x_low, dtype=float)
        if self.x_high is None:
            self.x_high = self.x.max(axis=0)
        else:
            self.x_high = np.asarray(self.x_high, dtype=float)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim_x(self) -> int:
        return self.x.shape[1]

    @property
    def dim_y(self) -> int:
        return self.y.shape[1]

    def simplex_labels(self, tol: float = 1e-9) -> bool:
        """True when every output is a probability vector within ``tol``."""
        y = self.y
        return bool((y >= -tol).all() and np.abs(y.sum(axis=1) - 1.0).max() <= tol)


@dataclass(frozen=True)
class CheckerboardSpec:
    """Synthetic two-class checkerboard on the unit square."""

    n_samples: int
    grid: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.grid < 1:
            raise ValueError("grid must be >= 1")


def checkerboard_label(x: np.ndarray, grid: int) -> np.ndarray:
    """One-hot labels for points in [0,1]^2: cell parity even -> class 0.

    Cells are floor(grid * x) with the top boundary folded into the last
    cell, so labels are a pure function of position.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cells = np.minimum(np.floor(x * grid).astype(int), grid - 1)
    white = (cells.sum(axis=1) % 2) == 0
    y = np.zeros((x.shape[0], 2))
    y[white, 0] = 1.0
    y[~white, 1] = 1.0
    return y


def gen_checkerboard(spec: CheckerboardSpec) -> LabeledDataset:
    """Sample ``n_samples`` points uniformly on [0,1]^2 and label by cell parity."""
    rng = np.random.default_rng(spec.seed)
    x = rng.uniform(0.0, 1.0, size=(spec.n_samples, 2))
    y = checkerboard_label(x, spec.grid)
    return LabeledDataset(x, y, x_low=np.zeros(2), x_high=np.ones(2))


# -- IDX container ----------------------------------------------------------

_IDX_UBYTE = 0x08


def read_idx(path) -> np.ndarray:
    """Parse an IDX file (optionally gzipped) of unsigned bytes.

    Layout: two zero bytes, a type code (0x08 = unsigned byte, the only
    supported code), a dimension count d, then d big-endian uint32 sizes,
    then the row-major payload.
    """
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                raw = gz.read()
        else:
            raw = fh.read()

    if len(raw) < 4:
        raise IdxFormatError("file shorter than the 4-byte magic", len(raw))
    if raw[0] != 0 or raw[1] != 0:
        raise IdxFormatError(f"bad magic bytes {raw[0]:#04x} {raw[1]:#04x}", 0)
    if raw[2] != _IDX_UBYTE:
        raise IdxFormatError(f"unsupported type code {raw[2]:#04x}", 2)
    ndim = raw[3]
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise IdxFormatError("truncated dimension header", len(raw))
    dims = [
        int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndim)
    ]
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(raw) != header_end + count:
        offset = min(len(raw), header_end + count)
        raise IdxFormatError(
            f"payload has {len(raw) - header_end} bytes, expected {count}", offset
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_end)
    return data.reshape(dims)


def write_idx(path, array: np.ndarray, compress: bool = False) -> None:
    """Write an unsigned-byte tensor in IDX layout (inverse of :func:`read_idx`)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = bytes([0, 0, _IDX_UBYTE, array.ndim])
    header += b"".join(int(d).to_bytes(4, "big") for d in array.shape)
    opener = gzip.open if compress else open
    with opener(path, "wb") as fh:
        fh.write(header + array.tobytes())


def load_idx_dataset(images_path, labels_path, n_classes: int = 10,
                     subsample: int | None = None, seed: int = 0) -> LabeledDataset:
    """Build a dataset from IDX image/label files: flatten, scale to [0,1], one-hot labels."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim < 2:
        raise ValueError("image tensor must have at least 2 dimensions")
    if labels.ndim != 1:
        raise ValueError("label tensor must be 1-dimensional")
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label counts differ")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    if labels.max() >= n_classes:
        raise ValueError(f"label {labels.max()} exceeds n_classes={n_classes}")
    y = np.zeros((labels.shape[0], n_classes))
    y[np.arange(labels.shape[0]), labels] = 1.0
    if subsample is not None and subsample < x.shape[0]:
        idx = np.random.default_rng(seed).choice(x.shape[0], subsample, replace=False)
        idx.sort()
        x, y = x[idx], y[idx]
    dim = x.shape[1]
    return LabeledDataset(x, y, x_low=np.zeros(dim), x_high=np.ones(dim))


# -- k-means ----------------------------------------------------------------

def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``."""
    if a.shape[0] * b.shape[0] * a.shape[1] <= 1 << 22:
        diff = a[:, None, :] - b[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    # BLAS form for large problems; clip tiny negatives from cancellation
    d2 = (
        (a * a).sum(axis=1)[:, None]
        - 2.0 * (a @ b.T)
        + (b * b).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans(points, n_clusters: int, max_iters: int = 100, seed: int = 0) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding.

    Deterministic given ``seed``. Empty clusters are re-seeded to the point
    farthest from its assigned centroid. Stops on an assignment fixpoint or
    after ``max_iters`` sweeps. Returns distinct centroids.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    distinct = np.unique(points, axis=0)
    if not 1 <= n_clusters <= distinct.shape[0]:
        raise ValueError(
            f"n_clusters={n_clusters} must lie in [1, {distinct.shape[0]}] (distinct points)"
        )
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((n_clusters, points.shape[1]))
    centroids[0] = points[rng.integers(points.shape[0])]
    closest = _pairwise_sq_dists(points, centroids[:1]).ravel()
    for c in range(1, n_clusters):
        total = closest.sum()
        if total <= 0.0:
            # all mass already covered; seed from remaining distinct points
            pool = distinct[~(distinct[:, None] == centroids[:c]).all(-1).any(-1)]
            centroids[c] = pool[0]
        else:
            r = rng.uniform(0.0, total)
            centroids[c] = points[np.searchsorted(np.cumsum(closest), r)]
        closest = np.minimum(closest, _pairwise_sq_dists(points, centroids[c : c + 1]).ravel())

    assign = None
    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(points, centroids)
        new_assign = d2.argmin(axis=1)  # ties -> lowest centroid index
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(n_clusters):
            mask = assign == c
            if mask.any():
                centroids[c] = points[mask].mean(axis=0)
        # re-seed empty clusters to the farthest point from its centroid
        nearest = d2[np.arange(points.shape[0]), assign]
        for c in range(n_clusters):
            if not (assign == c).any():
                far = int(nearest.argmax())
                centroids[c] = points[far]
                assign[far] = c
                nearest[far] = 0.0

    if np.unique(centroids, axis=0).shape[0] != n_clusters:
        raise RuntimeError("k-means produced coincident centroids")
    return centroids


def split(dataset: LabeledDataset, test_fraction: float, seed: int = 0):
    """Deterministic shuffled split into disjoint, exhaustive (train, test) parts."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = dataset.n
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    box = dict(x_low=dataset.x_low, x_high=dataset.x_high)
    train = LabeledDataset(dataset.x[train_idx], dataset.y[train_idx], **box)
    test = LabeledDataset(dataset.x[test_idx], dataset.y[test_idx], **box)
    return train, test
