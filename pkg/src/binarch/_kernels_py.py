"""Pure-numpy reference implementation of the hot kernels.

Used when the compiled extension is unavailable (or forced via the
BINARCH_FORCE_PYTHON environment variable). Semantics match
binarch._kernels_cy; the two are cross-checked in the test suite.
"""

import numpy as np

BACKEND_NAME = "python"


def _softplus(s):
    # log(1 + e^s) without overflow for large |s|
    out = np.empty_like(s)
    pos = s > 0
    out[pos] = s[pos] + np.log1p(np.exp(-s[pos]))
    out[~pos] = np.log1p(np.exp(s[~pos]))
    return out


def _sigmoid(s):
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def forward_scores(w1, w2, X):
    """Scores softplus(sum_i tanh(sum_j w2[i,j] tanh(w1[j,:] . x))) per row of X."""
    H = np.tanh(X @ w1.T)
    G = np.tanh(H @ w2.T)
    return _softplus(G.sum(axis=1))


def loss_and_grad(w1, w2, X, ysign):
    """Mean signed loss over the batch and its gradient w.r.t. (w1, w2).

    ysign holds (1 - 2y) per example. Returns (loss, g1, g2).
    """
    n = X.shape[0]
    H = np.tanh(X @ w1.T)
    G = np.tanh(H @ w2.T)
    s = G.sum(axis=1)
    loss = float(np.mean(_softplus(s) * ysign))
    p = _sigmoid(s) * ysign / n
    dG = p[:, None] * (1.0 - G * G)
    g2 = dG.T @ H
    dH = (dG @ w2) * (1.0 - H * H)
    g1 = dH.T @ X
    return loss, g1, g2


def jacobi_eigh(A, tol, max_sweeps, want_vectors):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns or None,
    final off-diagonal Frobenius norm, sweeps used). Does not check
    convergence; the caller decides whether the residual is acceptable.
    """
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n) if want_vectors else None
    fro = np.linalg.norm(A)
    thresh = tol * fro if fro > 0 else 0.0
    sweeps = 0
    for sweep in range(max_sweeps):
        off = _offdiag_norm(A)
        if off <= thresh:
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                _rotate(A, V, p, q, c, s)
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = V[:, order] if want_vectors else None
    return vals, vecs, _offdiag_norm(A), sweeps


def _offdiag_norm(A):
    off = A - np.diag(np.diag(A))
    return np.linalg.norm(off)


def _rotate(A, V, p, q, c, s):
    app, aqq, apq = A[p, p], A[q, q], A[p, q]
    rp = A[p, :].copy()
    rq = A[q, :].copy()
    A[p, :] = c * rp - s * rq
    A[q, :] = s * rp + c * rq
    cp = A[:, p].copy()
    cq = A[:, q].copy()
    A[:, p] = c * cp - s * cq
    A[:, q] = s * cp + c * cq
    # recompute the 2x2 pivot block exactly; rotation zeroes A[p,q]
    t = s / c
    A[p, p] = app - t * apq
    A[q, q] = aqq + t * apq
    A[p, q] = 0.0
    A[q, p] = 0.0
    if V is not None:
        vp = V[:, p].copy()
        vq = V[:, q].copy()
        V[:, p] = c * vp - s * vq
        V[:, q] = s * vp + c * vq
