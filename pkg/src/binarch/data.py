"""Dataset ingestion and preprocessing into unit-norm 64-dimensional tasks.

Two sources are supported:

* MNIST in CSV form: one row per image, `label,p0,...,p783` with pixel
  values in [0, 255]. A single header line is tolerated. Images are cropped
  by 2 pixels per side (28x28 -> 24x24), pooled over the 8x8 grid of 3x3
  non-overlapping windows (average pooling by default) and L2-normalized.

* Citeseer bag-of-words in the classic `.content` format: one line per
  document, whitespace-separated `doc_id f_1 ... f_p class_label` with
  integer-valued features (p = 3703 in the published distribution).
  Documents are reduced to 64 dimensions by PCA fitted on the entire corpus
  and then row-normalized.

Rows that become all-zero after preprocessing cannot be normalized; they
are excluded from task sampling and their source indices are reported.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from binarch import spectral

TARGET_DIM = 64
MNIST_SIDE = 28
MNIST_CROP = 2
CITESEER_CLASSES = 6


@dataclass
class RawDataset:
    labels: list  # per-row class label (int for mnist, str for citeseer)
    features: np.ndarray  # (n_rows, p)
    source_tag: str  # "mnist-csv" or "citeseer-bow"


@dataclass
class Task:
    """A binary classification task with disjoint train/test splits."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    group_a: tuple
    group_b: tuple
    n_train_per_class: int
    n_test_per_class: int
    seed: int = 0
    train_rows: np.ndarray = field(default=None, repr=False)  # source row ids
    test_rows: np.ndarray = field(default=None, repr=False)


def load_mnist_csv(path):
    """Parse an MNIST-in-CSV file; errors name the offending line."""
    labels, rows = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if lineno == 1 and not parts[0].lstrip("-").isdigit():
                continue  # header line
            if len(parts) != 785:
                raise ValueError(
                    f"{path}: line {lineno}: expected 785 columns, got {len(parts)}"
                )
            try:
                vals = np.array(parts, dtype=np.int64)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer value") from None
            label = int(vals[0])
            if not 0 <= label <= 9:
                raise ValueError(f"{path}: line {lineno}: label {label} not in 0..9")
            pix = vals[1:]
            if pix.min() < 0 or pix.max() > 255:
                raise ValueError(f"{path}: line {lineno}: pixel outside [0, 255]")
            labels.append(label)
            rows.append(pix)
    return RawDataset(labels, np.asarray(rows, dtype=np.float64), "mnist-csv")


def preprocess_mnist(raw, pooling="avg"):
    """Crop, pool to 64 dims, unit-normalize.

    Returns (rows, dropped) where rows is a list of (label, x) and dropped
    the source indices of images that pooled to the zero vector.
    """
    if raw.features.shape[1] != MNIST_SIDE * MNIST_SIDE:
        raise ValueError("expected 784-pixel rows")
    if pooling not in ("avg", "max"):
        raise ValueError(f"unknown pooling {pooling!r}")
    rows, dropped = [], []
    lo, hi = MNIST_CROP, MNIST_SIDE - MNIST_CROP
    for i, flat in enumerate(raw.features):
        img = flat.reshape(MNIST_SIDE, MNIST_SIDE)[lo:hi, lo:hi]
        blocks = img.reshape(8, 3, 8, 3)
        pooled = blocks.mean(axis=(1, 3)) if pooling == "avg" else blocks.max(axis=(1, 3))
        x = pooled.ravel()
        norm = np.linalg.norm(x)
        if norm == 0.0:
            dropped.append(i)
            continue
        rows.append((raw.labels[i], x / norm))
    return rows, dropped


def load_citeseer(path, expected_n_classes=None):
    """Parse a Citeseer-style `.content` file (id, features..., label)."""
    labels, rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise ValueError(f"{path}: line {lineno}: too few columns")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ValueError(
                    f"{path}: line {lineno}: ragged row "
                    f"({len(parts)} columns, expected {width})"
                )
            try:
                feats = np.array(parts[1:-1], dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric feature") from None
            labels.append(parts[-1])
            rows.append(feats)
    n_classes = len(set(labels))
    if expected_n_classes is not None and n_classes != expected_n_classes:
        raise ValueError(
            f"{path}: found {n_classes} classes, expected {expected_n_classes}"
        )
    return RawDataset(labels, np.asarray(rows, dtype=np.float64), "citeseer-bow")


def pca_project(matrix, k=TARGET_DIM):
    """Project rows onto the top-k principal components and row-normalize.

    Works on the covariance (p x p) or Gram (n x n) form, whichever is
    smaller. Returns (n x k projected rows, p x k orthonormal basis).
    Zero rows project to zero and are left unnormalized.
    """
    X = np.asarray(matrix, dtype=np.float64)
    n, p = X.shape
    if n <= k:
        raise ValueError(f"need more than k={k} rows, got {n}")
    if p < k:
        raise ValueError(f"need at least k={k} columns, got {p}")
    Xc = X - X.mean(axis=0)
    tol_rank = 1e-10
    if p <= n:
        cov = (Xc.T @ Xc) / (n - 1)
        vals, vecs = spectral.eigh_symmetric(cov, want_vectors=True)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        rank = int(np.sum(vals > tol_rank * max(vals.max(), 1.0)))
        if rank < k:
            raise ValueError(f"data rank {rank} is below target dimension {k}")
        basis = vecs[:, :k]
    else:
        gram = (Xc @ Xc.T) / (n - 1)
        vals, vecs = spectral.eigh_symmetric(gram, want_vectors=True)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        rank = int(np.sum(vals > tol_rank * max(vals.max(), 1.0)))
        if rank < k:
            raise ValueError(f"data rank {rank} is below target dimension {k}")
        # basis columns b_j = Xc^T u_j / sqrt((n-1) * lambda_j)
        basis = Xc.T @ vecs[:, :k] / np.sqrt((n - 1) * vals[:k])
    proj = Xc @ basis
    norms = np.linalg.norm(proj, axis=1)
    safe = norms > 0
    proj[safe] /= norms[safe, None]
    return proj, basis


def preprocess_citeseer(raw, k=TARGET_DIM):
    """PCA-reduce the whole corpus, normalize; returns (rows, dropped)."""
    proj, _ = pca_project(raw.features, k)
    rows, dropped = [], []
    for i, x in enumerate(proj):
        if np.linalg.norm(x) == 0.0:
            dropped.append(i)
            continue
        rows.append((raw.labels[i], x))
    return rows, dropped


def build_task(rows, group_a, group_b, n_train_per_class, n_test_per_class, seed):
    """Seeded sampling without replacement; test drawn first, then train.

    `rows` is a list of (label, unit vector). group_a maps to y=0 and
    group_b to y=1.
    """
    group_a, group_b = tuple(group_a), tuple(group_b)
    if set(group_a) & set(group_b):
        raise ValueError("class groups must be disjoint")
    rng = np.random.default_rng(seed)
    by_class = {}
    for idx, (label, x) in enumerate(rows):
        by_class.setdefault(label, []).append(idx)

    classes = group_a + group_b
    for cls in classes:
        pool = by_class.get(cls, [])
        need = n_train_per_class + n_test_per_class
        if len(pool) < need:
            raise ValueError(
                f"class {cls!r}: need {need} examples, have {len(pool)}"
            )

    # all test draws happen before any train draw, so the held-out set is
    # identical across train sizes for a fixed seed
    picked_test = {
        cls: rng.choice(len(by_class[cls]), size=n_test_per_class, replace=False)
        for cls in classes
    }
    train_idx, test_idx = [], []
    for cls in classes:
        pool = by_class[cls]
        remaining = np.setdiff1d(np.arange(len(pool)), picked_test[cls])
        picked_train = rng.choice(remaining, size=n_train_per_class, replace=False)
        test_idx.extend(pool[i] for i in picked_test[cls])
        train_idx.extend(pool[i] for i in picked_train)

    def _collect(indices):
        X = np.asarray([rows[i][1] for i in indices])
        y = np.asarray([0 if rows[i][0] in group_a else 1 for i in indices], dtype=np.int64)
        return X, y

    train_x, train_y = _collect(train_idx)
    test_x, test_y = _collect(test_idx)
    return Task(
        train_x=train_x,
        train_y=train_y,
        test_x=test_x,
        test_y=test_y,
        group_a=group_a,
        group_b=group_b,
        n_train_per_class=n_train_per_class,
        n_test_per_class=n_test_per_class,
        seed=seed,
        train_rows=np.asarray(train_idx),
        test_rows=np.asarray(test_idx),
    )


def write_processed(rows, path):
    """Canonical processed-dataset CSV: label, 64 doubles. Returns content hash."""
    with open(path, "w", newline="\n") as fh:
        for label, x in rows:
            fh.write(str(label) + "," + ",".join(repr(float(v)) for v in x) + "\n")
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def read_processed(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.strip().split(",")
            if len(parts) < 2:
                raise ValueError(f"{path}: line {lineno}: malformed row")
            label = parts[0]
            if label.lstrip("-").isdigit():
                label = int(label)
            rows.append((label, np.array(parts[1:], dtype=np.float64)))
    return rows
