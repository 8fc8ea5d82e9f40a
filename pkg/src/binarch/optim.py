"""SGD trainers: relaxed binary-weight search and real nonnegative training.

The binary search optimizes unconstrained weights w; the forward pass sees
the sharply binarized weights sigma(m_hard * w) while the update is damped
by the flatter derivative of sigma(m_soft * w). The real trainer
parameterizes w = u^2 to keep weights nonnegative and supports a fixed
{0,1} mask on the effective weights.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from binarch import model
from binarch.binarize import (
    DEFAULT_M_HARD,
    DEFAULT_M_SOFT,
    hard_binarize,
    soft_binarize,
    soft_binarize_deriv,
)


class TrainingDiverged(RuntimeError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss at step {step}: {value}")
        self.step = step


@dataclass(frozen=True)
class Schedule:
    kind: str  # "constant" or "inverse"
    value: float

    def __post_init__(self):
        if self.kind not in ("constant", "inverse"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if self.value < 0:
                raise ValueError("learning rate must be nonnegative")
        elif not self.value > 0:
            raise ValueError("schedule parameter must be positive")


def constant(eta):
    return Schedule("constant", float(eta))


def inverse(c):
    """eta_t = c / t."""
    return Schedule("inverse", float(c))


def lr_at(schedule, t):
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if schedule.kind == "constant":
        return schedule.value
    return schedule.value / t


@dataclass(frozen=True)
class TrainConfig:
    m_hard: float = DEFAULT_M_HARD
    m_soft: float = DEFAULT_M_SOFT
    epochs: int = 100
    batch_size: int = 32
    lr: Schedule = field(default_factory=lambda: constant(0.05))
    seed: int = 0
    init_scale: float = 0.05
    init_loc: float = -0.1  # negative shift keeps the initial mask sparse

    def __post_init__(self):
        if not (self.m_hard > 0 and self.m_soft > 0):
            raise ValueError("binarization constants must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


@dataclass
class StepRecords:
    """Per-step state needed for residual extraction (batch_size=1 runs)."""

    ws: np.ndarray  # (T+1, d); row t is w before step t+1, last row is final w
    batch_indices: list  # example indices of each minibatch
    etas: np.ndarray  # (T,)


@dataclass
class TrainTrace:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    residual_norms: list | None = None
    step_records: StepRecords | None = None

    def append(self, step, loss, elapsed):
        if self.steps and step <= self.steps[-1]:
            raise ValueError("step indices must be strictly increasing")
        self.steps.append(step)
        self.losses.append(loss)
        self.elapsed.append(elapsed)

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("step,loss,residual_norm,elapsed_seconds\n")
            for i, step in enumerate(self.steps):
                rn = "" if self.residual_norms is None else repr(self.residual_norms[i])
                fh.write(f"{step},{self.losses[i]!r},{rn},{self.elapsed[i]!r}\n")


def _epoch_batches(rng, n, batch_size):
    """Shuffled partition: every example appears exactly once per epoch."""
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def train_binary(X, y, config, record_steps=False):
    """Relaxed SGD architecture search; returns (final w, mask, trace).

    Deterministic given (config.seed, data). The trace logs the full-train
    relaxed loss F(sigma(m_hard * w)) once per epoch.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds training set size {n}")
    d = 2 * X.shape[1] ** 2
    rng = np.random.default_rng(config.seed)
    w = rng.normal(config.init_loc, config.init_scale, d)

    trace = TrainTrace()
    rec_ws, rec_idx, rec_etas = [], [], []
    t0 = time.perf_counter()
    step = 0
    for _ in range(config.epochs):
        for batch in _epoch_batches(rng, n, config.batch_size):
            step += 1
            eta = lr_at(config.lr, step)
            v = soft_binarize(w, config.m_hard)
            loss, g = model.batch_loss_grad(v, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(step, loss)
            if record_steps:
                rec_ws.append(w.copy())
                rec_idx.append(batch.copy())
                rec_etas.append(eta)
            w = w - eta * g * soft_binarize_deriv(w, config.m_soft)
        epoch_loss = model.batch_loss(soft_binarize(w, config.m_hard), X, y)
        trace.append(step, epoch_loss, time.perf_counter() - t0)
    if record_steps:
        rec_ws.append(w.copy())
        trace.step_records = StepRecords(
            ws=np.asarray(rec_ws), batch_indices=rec_idx, etas=np.asarray(rec_etas)
        )
    return w, hard_binarize(w), trace


def train_real_nonneg(X, y, config, mask=None):
    """SGD on u with w = u^2 (optionally masked); returns (w >= 0, trace)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds training set size {n}")
    d = 2 * X.shape[1] ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.size != d:
            raise ValueError(f"mask length {mask.size} != d = {d}")
    rng = np.random.default_rng(config.seed)
    u = rng.normal(0.0, config.init_scale, d)

    trace = TrainTrace()
    t0 = time.perf_counter()
    step = 0
    for _ in range(config.epochs):
        for batch in _epoch_batches(rng, n, config.batch_size):
            step += 1
            eta = lr_at(config.lr, step)
            w_eff = u * u if mask is None else u * u * mask
            loss, g = model.batch_loss_grad(w_eff, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDiverged(step, loss)
            gu = 2.0 * u * g if mask is None else 2.0 * u * mask * g
            u = u - eta * gu
        w_eff = u * u if mask is None else u * u * mask
        trace.append(step, model.batch_loss(w_eff, X, y), time.perf_counter() - t0)
    w_eff = u * u if mask is None else u * u * mask
    return w_eff, trace
