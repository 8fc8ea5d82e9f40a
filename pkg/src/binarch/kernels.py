"""Backend selection for the hot kernels.

Prefers the compiled extension; falls back to the numpy implementation if
the extension was not built. Set BINARCH_FORCE_PYTHON=1 to force the
fallback (useful for benchmarking and debugging).
"""

import os

from binarch import _kernels_py

if os.environ.get("BINARCH_FORCE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from binarch import _kernels_cy as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME


def forward_scores(w1, w2, X):
    return _impl.forward_scores(w1, w2, X)


def loss_and_grad(w1, w2, X, ysign):
    return _impl.loss_and_grad(w1, w2, X, ysign)


def jacobi_eigh(A, tol, max_sweeps, want_vectors):
    return _impl.jacobi_eigh(A, tol, max_sweeps, want_vectors)
