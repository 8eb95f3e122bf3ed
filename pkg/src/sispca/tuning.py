"""Selecting the disentanglement strength ``lam`` from a grid of fits.

Fit one model per grid value, compare every pair of models by the mean
Fubini-Study affinity of matching subspaces, then group similar models by
spectral clustering and report one representative ``lam`` per group.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, SisPCAError
from .metrics import score_affinity
from .model import FitConfig, FittedModel, SubspaceSpec, fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        if not v:
            raise ConfigError("lambda grid is empty")
        if any(not np.isfinite(x) or x < 0 for x in v):
            raise ConfigError("lambda grid values must be finite and >= 0")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def default(cls, n: int = 20, low: float = 1e-2, high: float = 1e2) -> "LambdaGrid":
        """``0`` followed by ``n - 1`` log-spaced values from ``low`` to ``high``."""
        return cls((0.0,) + tuple(np.logspace(np.log10(low), np.log10(high), n - 1)))

    def check_increasing(self) -> None:
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("lambda grid must be strictly increasing")


@dataclass(frozen=True)
class AffinityMatrix:
    values: np.ndarray
    grid: LambdaGrid


def truncation_ranks(model: FittedModel) -> List[int]:
    """Per-subspace ``min(rank(H K_Y H), d)``, floored at 1."""
    n = model.data_summary["n"]
    return [
        max(1, min(spec.target.centered_rank(n), res.U.shape[1]))
        for spec, res in zip(model.specs, model.subspaces)
    ]


def model_affinity(A: FittedModel, B: FittedModel, ranks: Optional[Sequence[int]] = None) -> float:
    """Mean affinity over matched subspaces of two models with the same structure."""
    if len(A.subspaces) != len(B.subspaces):
        raise ConfigError("models have different numbers of subspaces")
    for a, b in zip(A.subspaces, B.subspaces):
        if a.U.shape != b.U.shape or a.Z.shape[0] != b.Z.shape[0]:
            raise ConfigError(f"subspace {a.name!r} / {b.name!r} shapes differ")
    if ranks is None:
        ranks = truncation_ranks(A) if A.specs else [s.U.shape[1] for s in A.subspaces]
    vals = [score_affinity(a.Z, b.Z, k) for a, b, k in zip(A.subspaces, B.subspaces, ranks)]
    return float(np.mean(vals))


def affinity_matrix(models: Sequence[FittedModel], grid: LambdaGrid, ranks=None) -> AffinityMatrix:
    m = len(models)
    if ranks is None and m:
        ranks = truncation_ranks(models[0])
    V = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            V[i, j] = V[j, i] = model_affinity(models[i], models[j], ranks)
    return AffinityMatrix(V, grid)


@dataclass
class ScanResult:
    grid: LambdaGrid
    models: List[Optional[FittedModel]]
    errors: Dict[int, str]
    affinity: AffinityMatrix

    @property
    def ok_index(self) -> List[int]:
        return [i for i, m in enumerate(self.models) if m is not None]


def lambda_scan(
    X,
    specs: Sequence[SubspaceSpec],
    grid: Union[LambdaGrid, Sequence[float]],
    config: Optional[FitConfig] = None,
    workers: int = 1,
) -> ScanResult:
    """Fit one model per ``lam`` and compute the affinity matrix of the successful fits."""
    grid = grid if isinstance(grid, LambdaGrid) else LambdaGrid(tuple(grid))
    config = config or FitConfig()

    def one(lam):
        return fit(X, specs, replace(config, lam=lam))

    models: List[Optional[FittedModel]] = [None] * len(grid)
    errors: Dict[int, str] = {}
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        futures = [pool.submit(one, lam) for lam in grid]
        for i, fut in enumerate(futures):
            try:
                models[i] = fut.result()
            except SisPCAError as exc:
                errors[i] = f"{type(exc).__name__}: {exc}"
                msg = f"fit failed at lambda={grid.values[i]!r}, excluded from affinity: {exc}"
                log.warning(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)

    ok = [m for m in models if m is not None]
    sub_grid = LambdaGrid(tuple(grid.values[i] for i, m in enumerate(models) if m is not None)) if ok else grid
    affinity = affinity_matrix(ok, sub_grid) if ok else AffinityMatrix(np.zeros((0, 0)), grid)
    return ScanResult(grid, models, errors, affinity)


@dataclass
class ClusterResult:
    labels: np.ndarray
    n_clusters: int
    representatives: List[float]
    recommended_lambda: float
    laplacian_eigenvalues: np.ndarray
    degenerate: bool


def _choose_k(eigvals: np.ndarray, m: int) -> int:
    hi = min(6, m - 1)
    if hi < 2:
        return 1
    ks = np.arange(2, hi + 1)
    gaps = eigvals[ks] - eigvals[ks - 1]
    return int(ks[np.argmax(gaps)])


def spectral_cluster(
    affinity: Union[AffinityMatrix, np.ndarray],
    n_clusters: Union[int, str] = "auto",
    seed: int = 0,
    grid: Optional[Sequence[float]] = None,
) -> ClusterResult:
    """Normalized-Laplacian spectral clustering of models.

    Clusters are numbered by first appearance along the grid. The
    representative of a cluster is the lower median of its ``lam`` values; the
    recommendation is the representative of the largest cluster.
    """
    from sklearn.cluster import KMeans

    if isinstance(affinity, AffinityMatrix):
        A, lams = affinity.values, np.asarray(affinity.grid.values)
    else:
        A = np.asarray(affinity, dtype=np.float64)
        lams = np.asarray(grid if grid is not None else np.arange(A.shape[0]), dtype=np.float64)
    m = A.shape[0]
    if m < 2:
        raise ConfigError("spectral clustering needs at least 2 models")
    if A.shape != (m, m) or not np.allclose(A, A.T, atol=1e-9):
        raise ConfigError("affinity must be a symmetric square matrix")

    deg = A.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    L = np.eye(m) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    w, V = np.linalg.eigh(0.5 * (L + L.T))

    k = _choose_k(w, m) if n_clusters == "auto" else int(n_clusters)
    if not 1 <= k <= m:
        raise ConfigError(f"n_clusters must be in [1, {m}], got {n_clusters}")
    degenerate = k == 1 or (k < m and abs(w[k] - w[k - 1]) <= 1e-9)

    if k == 1:
        raw = np.zeros(m, dtype=int)
    else:
        E = V[:, :k]
        norms = np.linalg.norm(E, axis=1, keepdims=True)
        E = E / np.where(norms > 0, norms, 1.0)
        raw = KMeans(n_clusters=k, n_init=10, random_state=seed).fit_predict(E)

    relabel: Dict[int, int] = {}
    for r in raw:
        relabel.setdefault(int(r), len(relabel))
    labels = np.array([relabel[int(r)] for r in raw])
    k_found = len(relabel)

    reps = []
    sizes = []
    for c in range(k_found):
        members = np.sort(lams[labels == c])
        reps.append(float(members[(len(members) - 1) // 2]))
        sizes.append(len(members))
    best = int(np.argmax(sizes))
    return ClusterResult(labels, k_found, reps, reps[best], w, bool(degenerate))
