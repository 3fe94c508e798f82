"""Synthetic handwritten-digit stand-in: 10 smoothed class prototypes in
28x28 pixel space with additive noise, written as IDX files. Exercises the
image pipeline end to end when the real digit files are not on disk."""

import numpy as np

import liplearn as ll


def digit_images(n: int, seed: int = 0, size: int = 28, n_classes: int = 10):
    """Returns (images uint8 (n, size, size), labels uint8 (n,))."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    base_rng = np.random.default_rng(999)
    base = np.exp(-((xx - 0.5) ** 2 + (yy - 0.5) ** 2) / (2 * 0.3**2))
    protos = []
    for c in range(n_classes):
        blobs = 1.5 * base.copy()
        crng = np.random.default_rng(1000 + c)
        for _ in range(3):
            cx, cy = crng.uniform(0.2, 0.8, 2)
            sx = crng.uniform(0.08, 0.18)
            blobs += crng.uniform(0.5, 1.0) * np.exp(
                -((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sx**2))
        protos.append(blobs / blobs.max())
    protos = np.stack(protos)
    labels = rng.integers(0, n_classes, size=n).astype(np.uint8)
    # per-sample stroke-thickness jitter plus pixel noise keeps the class
    # clouds overlapping, like real handwriting
    intensity = rng.uniform(0.6, 1.0, n)[:, None, None]
    images = intensity * protos[labels] + rng.normal(0, 0.18, (n, size, size))
    images = np.clip(images, 0, 1)
    return (images * 255).astype(np.uint8), labels


def write_digit_idx(dir_path, n: int, seed: int = 0):
    """Writes images.idx / labels.idx under dir_path and returns the paths."""
    images, labels = digit_images(n, seed)
    img_path = str(dir_path / "images.idx")
    lab_path = str(dir_path / "labels.idx")
    ll.write_idx(img_path, images)
    ll.write_idx(lab_path, labels)
    return img_path, lab_path
