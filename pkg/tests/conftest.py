"""Shared fixtures: an offline MNIST-format stand-in dataset and helpers.

The acceptance experiments need a handwritten-digit corpus with a few
hundred images per class in the classic `label,p0,...,p783` CSV layout.
The sandbox has no network access, so we build one from sklearn's bundled
8x8 digits: nearest-neighbor upscale to 32x32, add a 1-pixel-shifted copy
of each image (to get past 200 rows per class), crop to 28x28 and rescale
intensities to [0, 255]. Everything downstream treats it as ordinary
MNIST-in-CSV.
"""

import numpy as np
import pytest
from sklearn.datasets import load_digits

from binarch import data, model


def digits_as_mnist_csv(path):
    d = load_digits()
    lines = []
    for img8, lab in zip(d.images, d.target):
        img32 = np.kron(img8, np.ones((4, 4)))
        for shift in (0, 1):
            img28 = np.roll(img32, shift, axis=1)[2:30, 2:30]
            pix = np.clip(np.round(img28 * 255.0 / 16.0), 0, 255).astype(int)
            lines.append(str(lab) + "," + ",".join(map(str, pix.ravel())))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def mnist_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("digits") / "digits_mnist.csv"
    digits_as_mnist_csv(path)
    return path


@pytest.fixture(scope="session")
def processed_rows(mnist_csv):
    raw = data.load_mnist_csv(mnist_csv)
    rows, dropped = data.preprocess_mnist(raw)
    assert dropped == []
    return rows


@pytest.fixture(scope="session")
def processed_csv(processed_rows, tmp_path_factory):
    path = tmp_path_factory.mktemp("processed") / "rows.csv"
    data.write_processed(processed_rows, path)
    return path


def random_unit_rows(rng, n, I):
    X = rng.normal(size=(n, I))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def central_diff_grad(w, x, y, h=1e-6):
    """Finite-difference oracle for the flat-weight gradient."""
    w = np.asarray(w, dtype=np.float64)
    g = np.empty_like(w)
    for i in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[i] += h
        wm[i] -= h
        g[i] = (model.example_loss(wp, x, y) - model.example_loss(wm, x, y)) / (2 * h)
    return g


def make_toy_task(seed=7, n=40):
    """I=2 circle task: unit inputs, label = upper half-plane."""
    rng = np.random.default_rng(seed)
    th = rng.uniform(0, 2 * np.pi, n)
    X = np.stack([np.cos(th), np.sin(th)], axis=1)
    y = (np.sin(th) > 0).astype(np.float64)
    return X, y
