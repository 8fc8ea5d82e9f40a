"""Benchmark the compiled kernels against the pure-numpy fallback."""

import time

import numpy as np

from binarch import _kernels_py

try:
    from binarch import _kernels_cy
except ImportError:
    _kernels_cy = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(batch_sizes=(1, 64), width=64, matrix_size=192, repeats=3,
                  inner_calls=200):
    rng = np.random.default_rng(0)
    w1 = rng.normal(size=(width, width))
    w2 = rng.normal(size=(width, width))
    backends = [("python", _kernels_py)]
    if _kernels_cy is not None:
        backends.append(("cython", _kernels_cy))
    else:
        print("compiled extension not available; benchmarking fallback only")

    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name, _ in backends))
    for bs in batch_sizes:
        X = rng.normal(size=(bs, width))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        ysign = np.where(rng.random(bs) < 0.5, 1.0, -1.0)
        times = []
        for _, impl in backends:
            times.append(
                _time(
                    lambda impl=impl: [
                        impl.loss_and_grad(w1, w2, X, ysign) for _ in range(inner_calls)
                    ],
                    repeats,
                )
                / inner_calls
            )
        _print_row(f"loss_and_grad batch={bs}", times)

    M = rng.normal(size=(matrix_size, matrix_size))
    M = (M + M.T) / 2
    times = []
    for _, impl in backends:
        times.append(_time(lambda impl=impl: impl.jacobi_eigh(M, 1e-12, 100, True), repeats))
    _print_row(f"jacobi_eigh n={matrix_size}", times)


def _print_row(label, times):
    cells = "".join(f"{t * 1e3:>10.3f}ms" for t in times)
    extra = ""
    if len(times) == 2 and times[1] > 0:
        extra = f"   ({times[0] / times[1]:.1f}x speedup)"
    print(f"{label:<28}{cells}{extra}")


if __name__ == "__main__":
    run_benchmark()
