"""Kernel matrices, supervision targets and the empirical HSIC statistic.

All kernels are dense ``n x n`` float64 arrays wrapped in :class:`KernelMatrix`.
Centering is performed by mean subtraction; the centering matrix
``H = I - 11^T / n`` is never formed explicitly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _backend
from .errors import DimensionError, NumericalError, ConfigError

# pairs sampled for the median heuristic on large inputs
MEDIAN_SAMPLE_PAIRS = 1_000_000
MEDIAN_EXACT_MAX_N = 2000
_MEDIAN_SUBSEED = 20240917


@dataclass(frozen=True)
class KernelMatrix:
    """A symmetric kernel matrix and whether it has been double-centered."""

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionError(f"kernel must be square, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


ArrayOrKernel = Union[KernelMatrix, np.ndarray]


def _as_kernel(K: ArrayOrKernel) -> KernelMatrix:
    return K if isinstance(K, KernelMatrix) else KernelMatrix(np.asarray(K))


@dataclass(frozen=True)
class SupervisionTarget:
    """Source of a target kernel ``K_Y``.

    Use the :meth:`categorical`, :meth:`continuous` and :meth:`identity`
    constructors rather than the raw initializer.
    """

    kind: str
    name: str = ""
    labels: Optional[np.ndarray] = field(default=None, repr=False)
    Y: Optional[np.ndarray] = field(default=None, repr=False)

    KINDS = ("categorical", "continuous", "identity")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown target kind {self.kind!r}")

    @classmethod
    def categorical(cls, labels, name: str = "") -> "SupervisionTarget":
        labels = np.asarray(labels)
        if labels.ndim != 1:
            raise DimensionError("categorical labels must be one-dimensional")
        return cls("categorical", name, labels=labels)

    @classmethod
    def continuous(cls, Y, name: str = "") -> "SupervisionTarget":
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2 or Y.shape[1] < 1:
            raise DimensionError("continuous target must be n x d with d >= 1")
        if not np.all(np.isfinite(Y)):
            raise ConfigError(f"continuous target {name!r} contains missing or non-finite values")
        return cls("continuous", name, Y=Y)

    @classmethod
    def identity(cls, name: str = "") -> "SupervisionTarget":
        return cls("identity", name)

    def n_samples(self) -> Optional[int]:
        if self.kind == "categorical":
            return len(self.labels)
        if self.kind == "continuous":
            return self.Y.shape[0]
        return None

    def check(self, n: int) -> None:
        """Raise if the target cannot supervise ``n`` samples."""
        m = self.n_samples()
        if m is not None and m != n:
            raise DimensionError(f"target {self.name!r} has {m} rows, data has {n}")
        if self.kind == "categorical" and len(np.unique(self.labels)) < 2:
            raise ConfigError(f"categorical target {self.name!r} needs at least 2 distinct labels")

    def factor(self) -> Optional[np.ndarray]:
        """Return ``F`` with ``K_Y = F F^T``; ``None`` for the identity kernel.

        For categorical targets ``F`` is the one-hot indicator matrix, for
        continuous targets it is the column-centered ``Y``.
        """
        if self.kind == "categorical":
            _, inverse = np.unique(self.labels, return_inverse=True)
            F = np.zeros((len(self.labels), inverse.max() + 1))
            F[np.arange(len(self.labels)), inverse] = 1.0
            return F
        if self.kind == "continuous":
            return _center_columns(self.Y, self.name)
        return None

    def kernel(self, n: Optional[int] = None) -> KernelMatrix:
        if self.kind == "categorical":
            return delta_kernel(self)
        if self.kind == "continuous":
            return linear_kernel(self)
        if n is None:
            raise DimensionError("identity target needs the sample count n")
        return KernelMatrix(np.eye(n))

    def centered_rank(self, n: int, tol: float = 1e-10) -> int:
        """Rank of ``H K_Y H``, the bound on a subspace's effective dimension."""
        if self.kind == "categorical":
            return len(np.unique(self.labels)) - 1
        if self.kind == "continuous":
            Yc = _center_columns(self.Y, self.name, warn=False)
            if not np.any(Yc):
                return 0
            s = np.linalg.svd(Yc, compute_uv=False)
            return int(np.sum(s > tol * s[0]))
        return n - 1


def _center_columns(Y: np.ndarray, name: str = "", warn: bool = True) -> np.ndarray:
    Yc = Y - Y.mean(axis=0)
    const = np.all(np.isclose(Yc, 0.0, atol=1e-14 * max(1.0, np.abs(Y).max(initial=0.0))), axis=0)
    if warn and np.any(const):
        warnings.warn(
            f"target {name!r}: column(s) {np.flatnonzero(const).tolist()} are constant",
            RuntimeWarning,
            stacklevel=3,
        )
    Yc[:, const] = 0.0
    return Yc


def center_kernel(K: ArrayOrKernel) -> KernelMatrix:
    """Return ``H K H`` by subtracting row and column means and adding the grand mean."""
    K = _as_kernel(K)
    if K.n < 2:
        raise DimensionError("centering needs n >= 2")
    if K.centered:
        return K
    return KernelMatrix(_backend.double_center(K.values), centered=True)


def delta_kernel(target: SupervisionTarget) -> KernelMatrix:
    labels = np.asarray(target.labels if isinstance(target, SupervisionTarget) else target)
    return KernelMatrix((labels[:, None] == labels[None, :]).astype(np.float64))


def linear_kernel(target: SupervisionTarget) -> KernelMatrix:
    """``Y Y^T`` of the column-centered target (sum of per-column kernels)."""
    if not isinstance(target, SupervisionTarget):
        target = SupervisionTarget.continuous(target)
    Yc = _center_columns(target.Y, target.name)
    return KernelMatrix(Yc @ Yc.T)


def median_pairwise_distance(X, seed: int = _MEDIAN_SUBSEED) -> float:
    """Median Euclidean distance over distinct pairs of rows.

    Exact for ``n <= 2000``; above that it is estimated from a fixed-seed
    sample of one million pairs.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise DimensionError("median heuristic needs n >= 2")
    if n <= MEDIAN_EXACT_MAX_N:
        D2 = _backend.pairwise_sq_dists(X)
        iu = np.triu_indices(n, k=1)
        return float(np.median(np.sqrt(D2[iu])))
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=MEDIAN_SAMPLE_PAIRS)
    j = rng.integers(0, n - 1, size=MEDIAN_SAMPLE_PAIRS)
    j = j + (j >= i)  # uniform over j != i
    diff = X[i] - X[j]
    return float(np.median(np.sqrt(np.einsum("ij,ij->i", diff, diff))))


def bandwidth(X, width: Union[float, str] = "median") -> float:
    """Resolve the Gaussian scale ``w`` in ``exp(-w^2 ||x - x'||^2)``."""
    if isinstance(width, str):
        if width != "median":
            raise ConfigError(f"unknown bandwidth rule {width!r}")
        m = median_pairwise_distance(X)
        if not m > 0.0:
            raise NumericalError("degenerate median bandwidth: median pairwise distance is 0")
        return 1.0 / m
    w = float(width)
    if not (w > 0.0 and np.isfinite(w)):
        raise ConfigError(f"Gaussian width must be positive, got {width!r}")
    return w


def gaussian_kernel(X, width: Union[float, str] = "median") -> KernelMatrix:
    """Gaussian kernel ``exp(-w^2 ||x_i - x_j||^2)``; "median" sets ``w = 1/median distance``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise DimensionError("Gaussian kernel needs n >= 2")
    w = bandwidth(X, width)
    return KernelMatrix(_backend.gaussian_kernel(X, w * w))


def hsic(K: ArrayOrKernel, L: ArrayOrKernel, normalized: bool = False) -> float:
    """Empirical HSIC ``tr(K H L H)``, divided by ``(n-1)^2`` when ``normalized``."""
    K, L = _as_kernel(K), _as_kernel(L)
    if K.n != L.n:
        raise DimensionError(f"kernel sizes differ: {K.n} vs {L.n}")
    if K.n < 2:
        raise DimensionError("HSIC needs n >= 2")
    Lc = center_kernel(L).values
    value = float(np.sum(K.values * Lc))
    if normalized:
        value /= (K.n - 1) ** 2
    return value


def linear_hsic(Zu, Zv, normalized: bool = False) -> float:
    """HSIC between linear kernels of two score matrices, ``||Zu^T H Zv||_F^2``.

    Runs in ``O(n d_u d_v)`` without forming any ``n x n`` matrix.
    """
    Zu = np.asarray(Zu, dtype=np.float64)
    Zv = np.asarray(Zv, dtype=np.float64)
    if Zu.ndim == 1:
        Zu = Zu[:, None]
    if Zv.ndim == 1:
        Zv = Zv[:, None]
    if Zu.shape[0] != Zv.shape[0]:
        raise DimensionError(f"row counts differ: {Zu.shape[0]} vs {Zv.shape[0]}")
    n = Zu.shape[0]
    C = (Zu - Zu.mean(axis=0)).T @ (Zv - Zv.mean(axis=0))
    value = float(np.sum(C * C))
    if normalized:
        value /= (n - 1) ** 2
    return value
