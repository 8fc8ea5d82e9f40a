"""Parameterized binarization: a logistic relaxation of the 0/1 step function.

The sharpness parameter M interpolates between a flat sigmoid (small M) and
the hard step (M -> infinity). Two different M values are used during
training: a large one defines the objective, a smaller one shapes the
gradient.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_M_HARD = 50.0
DEFAULT_M_SOFT = 5.0


@dataclass(frozen=True)
class BinarizationParams:
    """Sharpness constants for forward binarization and gradient shaping."""

    m_hard: float = DEFAULT_M_HARD
    m_soft: float = DEFAULT_M_SOFT

    def __post_init__(self):
        if not self.m_hard > 0:
            raise ValueError(f"m_hard must be positive, got {self.m_hard}")
        if not self.m_soft > 0:
            raise ValueError(f"m_soft must be positive, got {self.m_soft}")


def _as_finite_array(w):
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        idx = int(np.flatnonzero(~np.isfinite(np.atleast_1d(w)))[0])
        raise ValueError(f"non-finite weight at index {idx}")
    return w


def _check_sharpness(m):
    m = float(m)
    if not m > 0:
        raise ValueError(f"sharpness must be positive, got {m}")
    return m


def stable_sigmoid(t):
    """Elementwise logistic, computed branch-wise so exp never overflows."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def soft_binarize(w, m):
    """Logistic relaxation sigma(m*w), elementwise, strictly inside (0, 1)."""
    w = _as_finite_array(w)
    m = _check_sharpness(m)
    return stable_sigmoid(m * w)


def soft_binarize_deriv(w, m):
    """Derivative of soft_binarize: m * v * (1 - v) with v = sigma(m*w).

    Maximum value m/4, attained at w = 0.
    """
    v = soft_binarize(w, m)
    return float(m) * v * (1.0 - v)


def hard_binarize(w):
    """Step-function limit: 1 where w >= 0 (ties at zero map to 1), else 0."""
    w = _as_finite_array(w)
    return (w >= 0).astype(np.float64)
