"""Two-layer classifier and its exact gradients.

The network scores an I-dimensional unit-norm input through two tanh layers
followed by a softplus (the output nonlinearity is called "ReLU" in some
descriptions but is log(1 + e^s) here). The weight vector has a fixed flat
layout of length d = 2*I^2: the input->hidden matrix w1 first (row-major),
then the hidden->output matrix w2 (row-major). Masks, serialized models and
Laplacian assembly all rely on this layout.
"""

import json
from dataclasses import dataclass

import numpy as np

from binarch import kernels

DEFAULT_WIDTH = 64
LAYOUT_TAG = "w1-rowmajor;w2-rowmajor"


@dataclass(frozen=True)
class Example:
    """A unit-norm input vector with a {0,1} label."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        object.__setattr__(self, "x", x)
        if self.y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.y}")
        if abs(np.linalg.norm(x) - 1.0) >= 1e-9:
            raise ValueError("input vector is not unit-norm")


def width_of(w):
    """Infer the layer width I from a flat weight vector of length 2*I^2."""
    d = np.asarray(w).size
    I = round(np.sqrt(d / 2))
    if 2 * I * I != d:
        raise ValueError(f"weight vector length {d} is not of the form 2*I^2")
    return I


def split_weights(w, I=None):
    """Views (w1, w2) of the flat weight vector, both I x I."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if I is None:
        I = width_of(w)
    elif w.size != 2 * I * I:
        raise ValueError(f"expected length {2 * I * I}, got {w.size}")
    return w[: I * I].reshape(I, I), w[I * I :].reshape(I, I)


def join_weights(w1, w2):
    return np.concatenate([np.asarray(w1).ravel(), np.asarray(w2).ravel()])


class WeightVector:
    """Flat weight vector of length 2*I^2 with (w1, w2) matrix views."""

    __slots__ = ("data", "I")

    def __init__(self, data, I=None):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.I = width_of(self.data) if I is None else I
        if self.data.size != 2 * self.I * self.I:
            raise ValueError(
                f"length {self.data.size} does not match width {self.I}"
            )

    @property
    def w1(self):
        return self.data[: self.I * self.I].reshape(self.I, self.I)

    @property
    def w2(self):
        return self.data[self.I * self.I :].reshape(self.I, self.I)


def forward(w, x):
    """Network score for a single input; always in (0, softplus(I)]."""
    w1, w2 = split_weights(w)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size != w1.shape[0]:
        raise ValueError(f"input length {x.size} != width {w1.shape[0]}")
    return float(kernels.forward_scores(w1, w2, x.reshape(1, -1))[0])


def forward_batch(w, X):
    """Scores for each row of X."""
    w1, w2 = split_weights(w)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[1] != w1.shape[0]:
        raise ValueError(f"input width {X.shape[1]} != weight width {w1.shape[0]}")
    return kernels.forward_scores(w1, w2, X)


def example_loss(w, x, y):
    """Signed score: forward(w, x) * (1 - 2y)."""
    return forward(w, x) * (1 - 2 * int(y))


def batch_loss(w, X, y):
    """Mean signed score over a batch: positive pressure on y=0, negative on y=1."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    scores = forward_batch(w, X)
    return float(np.mean(scores * (1.0 - 2.0 * y)))


def loss_grad(w, x, y):
    """Exact gradient of example_loss w.r.t. the flat weight vector."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    _, g = batch_loss_grad(w, x.reshape(1, -1), np.asarray([y]))
    return g


def batch_loss_grad(w, X, y):
    """(batch_loss, flat gradient of batch_loss) in one pass."""
    w1, w2 = split_weights(w)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[1] != w1.shape[0]:
        raise ValueError(f"input width {X.shape[1]} != weight width {w1.shape[0]}")
    ysign = np.ascontiguousarray(1.0 - 2.0 * np.asarray(y, dtype=np.float64))
    loss, g1, g2 = kernels.loss_and_grad(w1, w2, X, ysign)
    return loss, join_weights(g1, g2)


def model_to_json(w, I=None):
    """Serialize a flat weight vector; round-trips bit-exactly."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    if I is None:
        I = width_of(w)
    return json.dumps({"I": I, "layout": LAYOUT_TAG, "weights": w.tolist()})


def model_from_json(text):
    rec = json.loads(text)
    if rec["layout"] != LAYOUT_TAG:
        raise ValueError(f"unknown weight layout {rec['layout']!r}")
    w = np.asarray(rec["weights"], dtype=np.float64)
    if w.size != 2 * rec["I"] ** 2:
        raise ValueError("weight count does not match declared width")
    return w, rec["I"]
