# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels (model gradient, Jacobi sweep).

Mirrors binarch._kernels_py; parity is enforced by the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "cython"


cdef void _rm_dgemm(char ta, char tb, int m, int n, int k, double alpha,
                    double* A, int lda, double* B, int ldb,
                    double beta, double* C, int ldc) noexcept nogil:
    # row-major matmul on top of Fortran dgemm: swap the operand order so
    # the column-major routine computes the transposed product in place
    dgemm(&tb, &ta, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef inline double _softplus1(double s) noexcept nogil:
    if s > 0:
        return s + log1p(exp(-s))
    return log1p(exp(s))


cdef inline double _sigmoid1(double s) noexcept nogil:
    cdef double e
    if s >= 0:
        return 1.0 / (1.0 + exp(-s))
    e = exp(s)
    return e / (1.0 + e)


def forward_scores(double[:, ::1] w1, double[:, ::1] w2, double[:, ::1] X):
    cdef int n = X.shape[0], I = w1.shape[0]
    cdef Py_ssize_t e, i
    cdef double s
    out_arr = np.empty(n, dtype=np.float64)
    H_arr = np.empty((n, I), dtype=np.float64)
    G_arr = np.empty((n, I), dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] G = G_arr
    with nogil:
        _rm_dgemm(b'N', b'T', n, I, I, 1.0, &X[0, 0], I, &w1[0, 0], I,
                  0.0, &H[0, 0], I)
    np.tanh(H_arr, out=H_arr)  # numpy's simd tanh beats scalar libm here
    with nogil:
        _rm_dgemm(b'N', b'T', n, I, I, 1.0, &H[0, 0], I, &w2[0, 0], I,
                  0.0, &G[0, 0], I)
    np.tanh(G_arr, out=G_arr)
    with nogil:
        for e in range(n):
            s = 0.0
            for i in range(I):
                s += G[e, i]
            out[e] = _softplus1(s)
    return out_arr


def loss_and_grad(double[:, ::1] w1, double[:, ::1] w2,
                  double[:, ::1] X, double[::1] ysign):
    cdef int n = X.shape[0], I = w1.shape[0]
    cdef Py_ssize_t e, i
    cdef double s, loss, p, gi
    g1_arr = np.empty((I, I), dtype=np.float64)
    g2_arr = np.empty((I, I), dtype=np.float64)
    H_arr = np.empty((n, I), dtype=np.float64)
    dG_arr = np.empty((n, I), dtype=np.float64)
    dH_arr = np.empty((n, I), dtype=np.float64)
    cdef double[:, ::1] g1 = g1_arr
    cdef double[:, ::1] g2 = g2_arr
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] dG = dG_arr
    cdef double[:, ::1] dH = dH_arr
    loss = 0.0
    with nogil:
        _rm_dgemm(b'N', b'T', n, I, I, 1.0, &X[0, 0], I, &w1[0, 0], I,
                  0.0, &H[0, 0], I)
    np.tanh(H_arr, out=H_arr)  # numpy's simd tanh beats scalar libm here
    with nogil:
        # dG holds the pre-activation first, then the output-layer deltas
        _rm_dgemm(b'N', b'T', n, I, I, 1.0, &H[0, 0], I, &w2[0, 0], I,
                  0.0, &dG[0, 0], I)
    np.tanh(dG_arr, out=dG_arr)
    with nogil:
        for e in range(n):
            s = 0.0
            for i in range(I):
                s += dG[e, i]
            loss += _softplus1(s) * ysign[e]
            p = _sigmoid1(s) * ysign[e] / n
            for i in range(I):
                gi = dG[e, i]
                dG[e, i] = p * (1.0 - gi * gi)
        _rm_dgemm(b'T', b'N', I, I, n, 1.0, &dG[0, 0], I, &H[0, 0], I,
                  0.0, &g2[0, 0], I)
        _rm_dgemm(b'N', b'N', n, I, I, 1.0, &dG[0, 0], I, &w2[0, 0], I,
                  0.0, &dH[0, 0], I)
        for e in range(n):
            for i in range(I):
                dH[e, i] *= 1.0 - H[e, i] * H[e, i]
        _rm_dgemm(b'T', b'N', I, I, n, 1.0, &dH[0, 0], I, &X[0, 0], I,
                  0.0, &g1[0, 0], I)
    return loss / n, g1_arr, g2_arr


def jacobi_eigh(cnp.ndarray[double, ndim=2] A_in, double tol,
                int max_sweeps, bint want_vectors):
    cdef cnp.ndarray[double, ndim=2] A = np.array(A_in, dtype=np.float64, order="C")
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[double, ndim=2] V = np.eye(n)
    cdef Py_ssize_t p, q, k, sweep
    cdef double apq, app, aqq, theta, t, c, s, tmp, fro, thresh, off
    cdef int sweeps = 0

    fro = np.linalg.norm(A)
    thresh = tol * fro if fro > 0 else 0.0
    for sweep in range(max_sweeps):
        off = _offdiag(A, n)
        if off <= thresh:
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif theta > 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    tmp = A[p, k]
                    A[p, k] = c * tmp - s * A[q, k]
                    A[q, k] = s * tmp + c * A[q, k]
                for k in range(n):
                    tmp = A[k, p]
                    A[k, p] = c * tmp - s * A[k, q]
                    A[k, q] = s * tmp + c * A[k, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                if want_vectors:
                    for k in range(n):
                        tmp = V[k, p]
                        V[k, p] = c * tmp - s * V[k, q]
                        V[k, q] = s * tmp + c * V[k, q]
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = V[:, order] if want_vectors else None
    return vals, vecs, _offdiag(A, n), sweeps


cdef double _offdiag(double[:, :] A, Py_ssize_t n):
    cdef double acc = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += A[i, j] * A[i, j]
    return sqrt(acc)
