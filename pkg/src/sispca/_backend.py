"""Select the kernel implementation at import time.

The compiled extension is used when importable. Set ``SISPCA_BACKEND=python``
to force the numpy fallback (``SISPCA_BACKEND=cython`` makes a missing
extension an error instead of a silent fallback).
"""
import os

from . import _pykernels

_requested = os.environ.get("SISPCA_BACKEND", "auto").lower()

if _requested == "python":
    impl = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as impl
        NAME = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        impl = _pykernels
        NAME = "python"

pairwise_sq_dists = impl.pairwise_sq_dists
gaussian_kernel = impl.gaussian_kernel
double_center = impl.double_center
gaussian_grad = impl.gaussian_grad

__all__ = [
    "NAME",
    "impl",
    "pairwise_sq_dists",
    "gaussian_kernel",
    "double_center",
    "gaussian_grad",
]
