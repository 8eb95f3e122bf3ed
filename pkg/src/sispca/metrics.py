"""Subspace quality and separateness metrics."""
from __future__ import annotations

import warnings
from typing import Dict, List

import numpy as np
from scipy.stats import rankdata

from . import _backend
from .errors import ConfigError, DimensionError, NumericalError, UndefinedMetricError
from .kernels import gaussian_kernel, hsic, linear_hsic

HSIC_GAUSSIAN_CONVENTION = "normalized tr(KHLH)/(n-1)^2, Gaussian exp(-w^2 d^2), w = 1/median pairwise distance per subspace"


def _2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def silhouette(points, labels) -> float:
    """Mean silhouette ``(b - a) / max(a, b)`` of a fixed labeling, Euclidean distance.

    Points in singleton clusters score 0.
    """
    X = _2d(points)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise DimensionError(f"{labels.shape[0]} labels for {X.shape[0]} points")
    classes, inv = np.unique(labels, return_inverse=True)
    k = len(classes)
    if k < 2:
        raise UndefinedMetricError("undefined silhouette: labels contain a single cluster")
    D = np.sqrt(_backend.pairwise_sq_dists(X))
    onehot = np.zeros((X.shape[0], k))
    onehot[np.arange(X.shape[0]), inv] = 1.0
    counts = onehot.sum(axis=0)
    sums = D @ onehot  # total distance from each point to each cluster
    own = counts[inv]
    idx = np.arange(X.shape[0])
    a = np.where(own > 1, sums[idx, inv] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / counts
    mean_other[idx, inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def orthonormal_basis(A, center: bool = False, rtol: float = 1e-10) -> np.ndarray:
    """Column-orthonormal basis of ``span(A)``, optionally after centering columns.

    Uses thin QR; when ``A`` is numerically rank deficient (a collapsed score
    axis, say) the basis is taken from the leading left singular vectors
    instead, so it spans exactly the column space.
    """
    A = _2d(A)
    if center:
        A = A - A.mean(axis=0)
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() > rtol * max(diag.max(), np.finfo(float).tiny):
        return Q
    P, s, _ = np.linalg.svd(A, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(len(s), dtype=bool)
    return P[:, keep]


def score_basis(Z) -> np.ndarray:
    """Orthonormal basis of the centered score space, the input for score-space distances."""
    return orthonormal_basis(Z, center=True)


def _cosines(A, B) -> np.ndarray:
    A, B = _2d(A), _2d(B)
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"ambient dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    Qa, Qb = orthonormal_basis(A), orthonormal_basis(B)
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    # rounding can push cosines slightly past 1
    return np.clip(s, 0.0, 1.0)


def principal_angles(A, B) -> np.ndarray:
    """Principal angles between ``span(A)`` and ``span(B)``, ascending.

    Inputs are orthonormalized first, so any full-rank basis is accepted.
    Small angles come from sines rather than arccos of cosines near 1,
    which would lose about half the significant digits.
    """
    A, B = _2d(A), _2d(B)
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"ambient dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    Qa, Qb = orthonormal_basis(A), orthonormal_basis(B)
    if Qa.shape[1] < Qb.shape[1]:
        Qa, Qb = Qb, Qa
    k = Qb.shape[1]
    if k == 0:
        return np.zeros(0)
    Y, cos, Vt = np.linalg.svd(Qa.T @ Qb, full_matrices=False)
    cos = np.clip(cos[:k], 0.0, 1.0)
    # sines from the component of the principal vectors of B outside span(A)
    Bv = Qb @ Vt.T
    sin = np.clip(np.linalg.norm(Bv - Qa @ (Qa.T @ Bv), axis=0), 0.0, 1.0)
    theta = np.where(cos * cos < 0.5, np.arccos(cos), np.arcsin(sin))
    return np.sort(theta)


def grassmann_geodesic(A, B) -> float:
    """Geodesic Grassmann distance ``sqrt(sum theta_i^2)``."""
    theta = principal_angles(A, B)
    return float(np.sqrt(np.sum(theta * theta)))


def fubini_study_affinity(A, B, k_trunc: int) -> float:
    """Product of cosines of the principal angles between the leading ``k_trunc`` columns."""
    if int(k_trunc) != k_trunc or k_trunc < 1:
        raise ConfigError(f"k_trunc must be a positive integer, got {k_trunc}")
    A, B = _2d(A), _2d(B)
    s = _cosines(A[:, :k_trunc], B[:, :k_trunc])
    return float(np.prod(s))


def score_grassmann(Z1, Z2) -> float:
    """Grassmann distance between two score matrices in sample space."""
    return grassmann_geodesic(score_basis(Z1), score_basis(Z2))


def score_affinity(Z1, Z2, k_trunc: int) -> float:
    """Fubini-Study affinity between truncated, centered score matrices."""
    Z1, Z2 = _2d(Z1), _2d(Z2)
    return fubini_study_affinity(score_basis(Z1[:, :k_trunc]), score_basis(Z2[:, :k_trunc]), k_trunc)


def max_abs_spearman(Z, y) -> float:
    """Largest absolute Spearman correlation between any column of ``Z`` and ``y``."""
    Z = _2d(Z)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != Z.shape[0]:
        raise DimensionError(f"{y.shape[0]} target values for {Z.shape[0]} rows")
    ry = rankdata(y)
    ry = ry - ry.mean()
    ny = np.sqrt(ry @ ry)
    if ny == 0:
        warnings.warn("constant target: Spearman correlation undefined, returning 0", RuntimeWarning, stacklevel=2)
        return 0.0
    best = 0.0
    for j in range(Z.shape[1]):
        rz = rankdata(Z[:, j])
        rz = rz - rz.mean()
        nz = np.sqrt(rz @ rz)
        if nz == 0:
            warnings.warn(f"column {j} is constant; it contributes 0", RuntimeWarning, stacklevel=2)
            continue
        best = max(best, abs(float(rz @ ry) / (nz * ny)))
    return best


def _gaussian_hsic(Z1, Z2) -> float:
    try:
        K1 = gaussian_kernel(Z1, "median")
        K2 = gaussian_kernel(Z2, "median")
    except NumericalError as exc:
        warnings.warn(f"Gaussian HSIC undefined: {exc}", RuntimeWarning, stacklevel=3)
        return float("nan")
    return hsic(K1, K2, normalized=True)


def subspace_hsic_report(model) -> List[Dict]:
    """Pairwise linear (unnormalized) and Gaussian (normalized) HSIC between subspaces."""
    subs = model.subspaces
    report = []
    for i in range(len(subs)):
        for j in range(i + 1, len(subs)):
            report.append(
                {
                    "pair": [subs[i].name, subs[j].name],
                    "hsic_linear": linear_hsic(subs[i].Z, subs[j].Z),
                    "hsic_gaussian": _gaussian_hsic(subs[i].Z, subs[j].Z),
                }
            )
    return report


def pairwise_grassmann(model) -> List[Dict]:
    subs = model.subspaces
    return [
        {"pair": [subs[i].name, subs[j].name], "grassmann": score_grassmann(subs[i].Z, subs[j].Z)}
        for i in range(len(subs))
        for j in range(i + 1, len(subs))
    ]
