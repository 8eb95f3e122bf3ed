"""Time the compiled kernel core against the numpy fallback.

Usage: python benchmarks/bench_backends.py [--sizes 200 500 1000 2000] [--repeat 5]

Prints one row per (function, n) with the best-of-``repeat`` wall time of
each backend, the speedup, and the max absolute difference of their outputs.
"""
import argparse
import timeit

import numpy as np

from sispca import _pykernels

try:
    from sispca import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def cases(n, d=3, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, d))
    w2 = 0.5
    K = _pykernels.gaussian_kernel(Z, w2)
    G = rng.standard_normal((n, n))
    G = G + G.T
    return {
        "pairwise_sq_dists": (Z,),
        "gaussian_kernel": (Z, w2),
        "double_center": (K,),
        "gaussian_grad": (Z, K, G, w2),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return
    print(f"{'function':<20}{'n':>6}{'python ms':>12}{'cython ms':>12}{'speedup':>9}{'max diff':>11}")
    for n in args.sizes:
        for name, inputs in cases(n).items():
            py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
            t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat))
            t_cy = min(timeit.repeat(lambda: cy(*inputs), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(py(*inputs) - cy(*inputs))))
            print(f"{name:<20}{n:>6}{1e3 * t_py:>12.2f}{1e3 * t_cy:>12.2f}{t_py / t_cy:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
