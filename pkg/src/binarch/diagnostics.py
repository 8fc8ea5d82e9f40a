"""Empirical checks of the convergence theory.

The relaxed update can be rewritten as an exact gradient step on the
binarized iterates plus an error term r^t; the error norm admits the bound
||r^t||^2 <= G^2 * C^2 with C = 1 + m_hard*m_soft/16 and G a bound on the
gradient norm. These routines extract r^t algebraically from recorded
iterates, estimate G by sampling, and generate the loss-vs-step curves and
rate tables used to check the 1/t-schedule convergence bound.
"""

from dataclasses import dataclass

import numpy as np

from binarch import model, optim
from binarch.binarize import soft_binarize, soft_binarize_deriv


@dataclass
class ResidualRecord:
    t: int
    residual_norm_sq: float
    bound: float
    eta_t: float


@dataclass
class RatePoint:
    T: int
    gap: float
    bound: float
    violated: bool


@dataclass
class CellCurves:
    m_hard: float
    m_soft: float
    epochs: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    raw: np.ndarray  # (n_seeds, n_epochs)


def lemma2_constant(m_hard, m_soft):
    """C = 1 + m_hard * m_soft / 16."""
    if not (m_hard > 0 and m_soft > 0):
        raise ValueError("binarization constants must be positive")
    return 1.0 + m_hard * m_soft / 16.0


def estimate_G(X, y, n_samples, seed=0):
    """Sampled lower estimate of the gradient-norm bound.

    Maximizes ||grad f(v, z)|| over n_samples pairs (v, z) with z uniform
    from the task and v drawn sparsity-stratified: a support size k uniform
    in {0,...,d} is picked first, then k coordinates uniform in [0,1] with
    the rest zero. Fully dense uniform v saturates the tanh layers on
    nonnegative inputs and its gradients all but vanish, so stratifying by
    sparsity is what actually explores the high-gradient region SGD visits;
    the result is still a lower estimate of the true supremum. Returns
    (G_hat, n_samples).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    d = 2 * X.shape[1] ** 2
    rng = np.random.default_rng(seed)
    g_hat = 0.0
    for _ in range(n_samples):
        k = int(rng.integers(0, d + 1))
        v = np.zeros(d)
        idx = rng.choice(d, size=k, replace=False)
        v[idx] = rng.uniform(0.0, 1.0, k)
        i = int(rng.integers(X.shape[0]))
        _, g = model.batch_loss_grad(v, X[i : i + 1], y[i : i + 1])
        g_hat = max(g_hat, float(np.linalg.norm(g)))
    return g_hat, n_samples


def extract_residuals(step_records, X, y, m_hard, g_hat, c_const):
    """Algebraic extraction of the per-step error terms from a recorded run.

    Requires single-example minibatches. Returns (records, mean residual
    vector); the mean is reported descriptively, not asserted.
    """
    if step_records is None:
        raise ValueError("run was not recorded (record_steps=False)")
    ws = step_records.ws
    etas = step_records.etas
    n_steps = etas.size
    r_sum = np.zeros(ws.shape[1])
    records = []
    bound = (g_hat * c_const) ** 2
    for t in range(n_steps):
        batch = step_records.batch_indices[t]
        if len(batch) != 1:
            raise ValueError("residual extraction requires batch_size = 1")
        eta = etas[t]
        if eta == 0:
            raise ValueError(f"zero learning rate at step {t + 1}")
        v_t = soft_binarize(ws[t], m_hard)
        v_next = soft_binarize(ws[t + 1], m_hard)
        _, grad = model.batch_loss_grad(v_t, X[batch], y[batch])
        r = (v_t - v_next) / eta - grad
        r_sum += r
        records.append(
            ResidualRecord(
                t=t + 1,
                residual_norm_sq=float(r @ r),
                bound=bound,
                eta_t=float(eta),
            )
        )
    return records, r_sum / max(n_steps, 1)


def residuals_to_csv(records, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("t,residual_norm_sq,bound,eta_t\n")
        for r in records:
            fh.write(f"{r.t},{r.residual_norm_sq!r},{r.bound!r},{r.eta_t!r}\n")


def convergence_study(X, y, grid, base_config, n_seeds=10):
    """Loss curves per (m_hard, m_soft) cell with median and quartile envelopes."""
    if not grid:
        raise ValueError("empty grid")
    out = {}
    for m_hard, m_soft in grid:
        curves = []
        for s in range(n_seeds):
            cfg = optim.TrainConfig(
                m_hard=m_hard,
                m_soft=m_soft,
                epochs=base_config.epochs,
                batch_size=base_config.batch_size,
                lr=base_config.lr,
                seed=base_config.seed + s,
                init_scale=base_config.init_scale,
                init_loc=base_config.init_loc,
            )
            _, _, trace = optim.train_binary(X, y, cfg)
            curves.append(trace.losses)
        raw = np.asarray(curves)
        out[(m_hard, m_soft)] = CellCurves(
            m_hard=m_hard,
            m_soft=m_soft,
            epochs=np.arange(1, raw.shape[1] + 1),
            median=np.median(raw, axis=0),
            q25=np.percentile(raw, 25, axis=0),
            q75=np.percentile(raw, 75, axis=0),
            raw=raw,
        )
    return out


def convergence_to_csv(cells, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("m_hard,m_soft,epoch,median,q25,q75\n")
        for (mh, ms), cell in sorted(cells.items()):
            for i, ep in enumerate(cell.epochs):
                fh.write(
                    f"{float(mh)!r},{float(ms)!r},{int(ep)},{float(cell.median[i])!r},"
                    f"{float(cell.q25[i])!r},{float(cell.q75[i])!r}\n"
                )


def theorem_bound(c, G, C, T):
    """G^2 * c * (1 + C^2) / 2 * (1 + log T) / T."""
    return G * G * c * (1.0 + C * C) / 2.0 * (1.0 + np.log(T)) / T


def rate_curve(points, c, G, C, F_star):
    """Empirical gap vs theoretical bound at each logged step count.

    `points` is a list of (T, F_value) pairs from a c/t-schedule run.
    """
    if F_star is None or not np.isfinite(F_star):
        raise ValueError("a finite F_star estimate is required")
    rows = []
    for T, F_val in points:
        gap = F_val - F_star
        bound = theorem_bound(c, G, C, T)
        rows.append(RatePoint(T=int(T), gap=float(gap), bound=float(bound),
                              violated=bool(gap > bound)))
    return rows


def rate_to_csv(rows, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("T,gap,bound,violated\n")
        for r in rows:
            fh.write(f"{r.T},{r.gap!r},{r.bound!r},{int(r.violated)}\n")


# --- convex surrogate -------------------------------------------------------
#
# The convergence theorem assumes a convex per-example loss, which the
# two-layer network violates. The surrogate keeps the whole pipeline
# (relaxed binarization, single-example SGD, c/t schedule) but scores
# linearly: f(v, z) = (1 - 2y) * v.x with v of length I. Its gradient is
# (1 - 2y) * x, so G = max ||x|| (= 1 for unit-norm inputs), and the optimal
# relaxed loss is known in closed form.


def surrogate_F(v, X, y):
    cbar = np.mean((1.0 - 2.0 * np.asarray(y, dtype=np.float64))[:, None] * X, axis=0)
    return float(v @ cbar)


def surrogate_F_star(X, y):
    """Exact min over v in [0,1]^d of the linear surrogate objective."""
    cbar = np.mean((1.0 - 2.0 * np.asarray(y, dtype=np.float64))[:, None] * X, axis=0)
    return float(np.minimum(cbar, 0.0).sum())


def run_convex_surrogate(X, y, c, n_steps, m_hard, m_soft, seed,
                         init_scale=0.1, log_at=None):
    """Single-example relaxed SGD on the linear surrogate with eta_t = c/t.

    Returns a list of (T, F(sigma(m_hard * w^T))) at the logged step counts.
    """
    X = np.asarray(X, dtype=np.float64)
    ysign = 1.0 - 2.0 * np.asarray(y, dtype=np.float64)
    n, I = X.shape
    if log_at is None:
        log_at = [n_steps]
    log_at = sorted(set(int(t) for t in log_at))
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, init_scale, I)
    cbar = np.mean(ysign[:, None] * X, axis=0)
    points = []
    for t in range(1, n_steps + 1):
        i = int(rng.integers(n))
        grad = ysign[i] * X[i]
        w = w - (c / t) * grad * soft_binarize_deriv(w, m_soft)
        if t in log_at:
            points.append((t, float(soft_binarize(w, m_hard) @ cbar)))
    return points
