"""Laplacian spectral signatures of networks and their comparison.

A network with weight matrices (W1, W2) is viewed as a tripartite weighted
graph on 3I nodes (inputs, hidden, outputs) with self-loops on every node.
The sorted eigenvalues of its normalized Laplacian form a signature that is
invariant to hidden-node relabeling.
"""

from dataclasses import dataclass

import numpy as np

from binarch import kernels

EIGEN_SIZE_CAP = 1024
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class EigenConvergenceError(RuntimeError):
    def __init__(self, residual, sweeps):
        super().__init__(
            f"Jacobi sweep did not converge after {sweeps} sweeps "
            f"(off-diagonal residual {residual:.3e})"
        )
        self.residual = residual


@dataclass
class SpectralSignature:
    eigenvalues: np.ndarray  # ascending, length 3I
    network_id: str

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be ascending")
        if ev.min() < -1e-9 or ev.max() > 2.0 + 1e-9:
            raise ValueError("normalized-Laplacian eigenvalues must lie in [0, 2]")
        object.__setattr__(self, "eigenvalues", ev)


def assemble_adjacency(w1, w2):
    """Symmetric 3I x 3I block adjacency with identity diagonal blocks.

    Layout (blocks of size I): row 1 = [Id, W2, 0], row 2 = [W2^T, Id, W1],
    row 3 = [0, W1^T, Id]. Entries must be nonnegative.
    """
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    I = w1.shape[0]
    if w1.shape != (I, I) or w2.shape != (I, I):
        raise ValueError("weight matrices must be square and equally sized")
    if np.any(w1 < 0) or np.any(w2 < 0):
        raise ValueError("adjacency weights must be nonnegative")
    A = np.zeros((3 * I, 3 * I))
    eye = np.eye(I)
    A[0:I, 0:I] = eye
    A[I : 2 * I, I : 2 * I] = eye
    A[2 * I :, 2 * I :] = eye
    A[0:I, I : 2 * I] = w2
    A[I : 2 * I, 0:I] = w2.T
    A[I : 2 * I, 2 * I :] = w1
    A[2 * I :, I : 2 * I] = w1.T
    return A


def normalized_laplacian(A):
    """L = Id - D^(-1/2) A D^(-1/2); exactly symmetric for symmetric A."""
    A = np.asarray(A, dtype=np.float64)
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("zero degree encountered (self-loops missing?)")
    s = 1.0 / np.sqrt(deg)
    # outer(s, s) is exactly symmetric, so L inherits A's symmetry bit-for-bit
    return np.eye(A.shape[0]) - A * np.multiply.outer(s, s)


def eigenvalues_symmetric(M, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS,
                          size_cap=EIGEN_SIZE_CAP):
    """Ascending eigenvalues of a symmetric matrix via cyclic Jacobi sweeps."""
    vals, _ = _jacobi(M, tol, max_sweeps, size_cap, want_vectors=False)
    return vals


def eigh_symmetric(M, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS,
                   size_cap=EIGEN_SIZE_CAP, want_vectors=True):
    """Like eigenvalues_symmetric but also returns the eigenvector columns."""
    return _jacobi(M, tol, max_sweeps, size_cap, want_vectors=want_vectors)


def _jacobi(M, tol, max_sweeps, size_cap, want_vectors):
    M = np.ascontiguousarray(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > size_cap:
        raise ValueError(f"matrix size {n} exceeds the configured cap {size_cap}")
    if n and np.max(np.abs(M - M.T)) >= 1e-10:
        raise ValueError("matrix is not symmetric")
    vals, vecs, residual, sweeps = kernels.jacobi_eigh(M, tol, max_sweeps, want_vectors)
    fro = np.linalg.norm(M)
    if residual > tol * fro and fro > 0:
        raise EigenConvergenceError(residual, sweeps)
    return vals, vecs


def signature_of_network(weights, network_id):
    """Signature of a flat weight vector (mask or nonnegative real weights)."""
    from binarch.model import split_weights

    w1, w2 = split_weights(weights)
    L = normalized_laplacian(assemble_adjacency(w1, w2))
    ev = eigenvalues_symmetric(L)
    # clip float fuzz at the theoretical range boundaries
    ev = np.clip(ev, 0.0, 2.0)
    return SpectralSignature(eigenvalues=np.sort(ev), network_id=network_id)


def spectral_distance(s1, s2):
    """Euclidean distance between sorted eigenvalue vectors."""
    a, b = s1.eigenvalues, s2.eigenvalues
    if a.size != b.size:
        raise ValueError(f"signature lengths differ: {a.size} vs {b.size}")
    return float(np.linalg.norm(a - b))


def spectra_pca(signatures):
    """2-d PCA embedding of the signatures; deterministic sign convention."""
    if len(signatures) < 3:
        raise ValueError("need at least 3 signatures")
    S = np.asarray([s.eigenvalues for s in signatures])
    Sc = S - S.mean(axis=0)
    n, p = Sc.shape
    if p <= n:
        cov = (Sc.T @ Sc) / (n - 1)
        vals, vecs = eigh_symmetric(cov)
        order = np.argsort(vals)[::-1]
        axes = vecs[:, order[:2]]
    else:
        gram = (Sc @ Sc.T) / (n - 1)
        vals, vecs = eigh_symmetric(gram)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        axes = np.zeros((p, 2))
        for j in range(2):
            if vals[j] > 0:
                axes[:, j] = Sc.T @ vecs[:, j] / np.sqrt((n - 1) * vals[j])
    for j in range(2):
        k = int(np.argmax(np.abs(axes[:, j])))
        if axes[k, j] < 0:
            axes[:, j] = -axes[:, j]
    return [tuple(row) for row in (Sc @ axes)]
