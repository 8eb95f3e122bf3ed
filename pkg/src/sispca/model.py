"""sisPCA model fitting.

Two solvers are provided:

* :func:`fit_linear` -- alternating eigendecomposition for linear latent
  kernels. Each sweep replaces every ``U_j`` by the top eigenvectors of
  ``X^T H (K_Yj - lam * sum_{i != j} K_Zi) H X``, the exact maximizer of the
  objective over ``U_j`` with the other subspaces held fixed, so the
  objective never decreases.
* :func:`fit_general` -- projected gradient descent for arbitrary latent
  kernels (linear or Gaussian), re-orthonormalizing every ``U_j`` with its
  polar factor after each step.

PCA (identity target, ``lam = 0``) and supervised PCA (``lam = 0``) are
special cases of both.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import _backend
from .data import DataMatrix
from .errors import ConfigError, DimensionError, NumericalError
from .kernels import SupervisionTarget, bandwidth, center_kernel, linear_hsic

LATENT_KERNELS = ("linear", "gaussian")
ALGORITHMS = ("linear", "general")
# eigenvalues below this fraction of the largest are reported as collapsed
COLLAPSE_RTOL = 1e-8


@dataclass(frozen=True)
class SubspaceSpec:
    """Requested subspace: name, dimension, target and latent kernel."""

    name: str
    dim: int
    target: SupervisionTarget
    latent_kernel: str = "linear"
    width: Union[float, str] = "median"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigError(f"subspace {self.name!r}: dim must be a positive integer")
        if self.latent_kernel not in LATENT_KERNELS:
            raise ConfigError(f"subspace {self.name!r}: unknown latent kernel {self.latent_kernel!r}")


@dataclass(frozen=True)
class SubspaceResult:
    """Fitted loadings ``U`` (p x d), scores ``Z = X U`` and per-axis variance."""

    name: str
    U: np.ndarray
    Z: np.ndarray
    explained_variance: np.ndarray


@dataclass(frozen=True)
class FitConfig:
    lam: float = 0.0
    max_iter: int = 100
    rel_tol: float = 1e-7
    algorithm: str = "linear"
    init_ordering: str = "auto"
    seed: int = 0
    learning_rate: float = 1e-2
    init: str = "random"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")
        if not (0 < self.rel_tol < 1):
            raise ConfigError("rel_tol must lie in (0, 1)")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.init_ordering not in ("auto", "fixed"):
            raise ConfigError(f"unknown init_ordering {self.init_ordering!r}")
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate must be positive")
        if self.init not in ("random", "spca"):
            raise ConfigError(f"unknown init {self.init!r}")

    def to_dict(self) -> dict:
        return {
            "lambda": float(self.lam),
            "max_iter": int(self.max_iter),
            "rel_tol": float(self.rel_tol),
            "algorithm": self.algorithm,
            "init_ordering": self.init_ordering,
            "seed": int(self.seed),
            "learning_rate": float(self.learning_rate),
            "init": self.init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown fit options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class FittedModel:
    subspaces: tuple
    objective_trace: np.ndarray
    config: FitConfig
    data_summary: dict
    specs: tuple = ()
    order: tuple = ()
    converged: bool = False
    n_iter: int = 0
    bandwidths: tuple = ()

    def __getitem__(self, key):
        if isinstance(key, str):
            for s in self.subspaces:
                if s.name == key:
                    return s
            raise KeyError(key)
        return self.subspaces[key]

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.subspaces]

    @property
    def scores(self) -> List[np.ndarray]:
        return [s.Z for s in self.subspaces]


class Objective(NamedTuple):
    value: float
    supervision: float
    disentanglement: float


# ---------------------------------------------------------------------------
# helpers


def _as_data(X) -> DataMatrix:
    return X if isinstance(X, DataMatrix) else DataMatrix.from_array(X)


def _sign_fix(V: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _top_eigen(M: np.ndarray, d: int):
    M = 0.5 * (M + M.T)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(M) if np.all(np.isfinite(M)) else float("nan")
        raise NumericalError(f"eigendecomposition failed (condition number {cond:.3e})") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigendecomposition returned non-finite eigenvalues")
    order = np.lexsort((np.arange(len(w)), -w))[:d]
    return _sign_fix(V[:, order]), w[order]


def _supervision_gram(X: np.ndarray, target: SupervisionTarget) -> np.ndarray:
    """``X^T H K_Y H X`` for column-centered ``X`` without forming ``K_Y``."""
    F = target.factor()
    if F is None:
        return X.T @ X
    P = F.T @ X
    return P.T @ P


def _check_specs(specs, data: DataMatrix) -> None:
    if not specs:
        raise ConfigError("at least one subspace spec is required")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"subspace names must be unique, got {names}")
    for s in specs:
        if s.dim > data.p:
            raise ConfigError(f"subspace {s.name!r}: dim {s.dim} exceeds feature count {data.p}")
        s.target.check(data.n)


def _summary(data: DataMatrix) -> dict:
    return {
        "n": data.n,
        "p": data.p,
        "means": data.means.copy(),
        "scales": data.scales.copy(),
        "feature_names": tuple(data.feature_names),
    }


def _warn_collapsed(name: str, ev: np.ndarray) -> None:
    top = np.max(np.abs(ev)) if ev.size else 0.0
    collapsed = int(np.sum(np.abs(ev) <= COLLAPSE_RTOL * top)) if top > 0 else len(ev)
    if collapsed:
        warnings.warn(
            f"subspace {name!r}: {collapsed} of {len(ev)} axes have ~zero explained variance "
            "(requested dim exceeds effective dimension)",
            RuntimeWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# objective


def _z_of(s) -> np.ndarray:
    Z = s.Z if isinstance(s, SubspaceResult) else np.asarray(s, dtype=np.float64)
    return Z[:, None] if Z.ndim == 1 else Z


def _latent_kernel(Z: np.ndarray, spec: SubspaceSpec, w=None) -> np.ndarray:
    if spec.latent_kernel == "linear":
        return Z @ Z.T
    if w is None:
        w = bandwidth(Z, spec.width)
    return _backend.gaussian_kernel(Z, w * w)


def objective(X, subspaces: Sequence, specs: Sequence[SubspaceSpec], lam: float, bandwidths=None) -> Objective:
    """Supervision term minus ``lam`` times the pairwise disentanglement term.

    ``subspaces`` are :class:`SubspaceResult` objects or plain score matrices.
    HSIC values are unnormalized. ``bandwidths`` overrides the Gaussian scale
    ``w`` per subspace (``None`` entries use the spec's width rule).
    """
    data = _as_data(X)
    Zs = [_z_of(s) for s in subspaces]
    if len(Zs) != len(specs):
        raise ConfigError("number of subspaces and specs differ")
    for Z in Zs:
        if Z.shape[0] != data.n:
            raise DimensionError(f"scores have {Z.shape[0]} rows, data has {data.n}")
    bws = list(bandwidths) if bandwidths is not None else [None] * len(Zs)
    m = len(Zs)

    if all(s.latent_kernel == "linear" for s in specs):
        sup = 0.0
        for Z, spec in zip(Zs, specs):
            F = spec.target.factor()
            Zc = Z - Z.mean(axis=0)
            P = Zc if F is None else F.T @ Zc
            sup += float(np.sum(P * P))
        dis = sum(linear_hsic(Zs[i], Zs[j]) for j in range(m) for i in range(j + 1, m))
        return Objective(sup - lam * dis, sup, float(dis))

    Ks = [_latent_kernel(Z, spec, w) for Z, spec, w in zip(Zs, specs, bws)]
    Kc = [_backend.double_center(K) for K in Ks]
    sup = 0.0
    for K, spec in zip(Kc, specs):
        sup += _target_inner(K, spec.target)
    dis = 0.0
    for j in range(m):
        for i in range(j + 1, m):
            dis += float(np.sum(Ks[i] * Kc[j]))
    return Objective(sup - lam * dis, sup, dis)


def _target_inner(Kc: np.ndarray, target: SupervisionTarget) -> float:
    """``tr(K H K_Y H)`` given an already centered ``K``."""
    F = target.factor()
    if F is None:
        return float(np.trace(Kc))
    return float(np.sum(F * (Kc @ F)))


# ---------------------------------------------------------------------------
# sisPCA-linear


def eigen_update(X, K_tilde, d: int, name: str = "") -> SubspaceResult:
    """Top-``d`` eigenvectors of ``X^T K_tilde X`` as a new subspace.

    ``K_tilde`` is the assembled (centered) working kernel for this subspace.
    """
    data = _as_data(X)
    K = K_tilde.values if hasattr(K_tilde, "values") else np.asarray(K_tilde, dtype=np.float64)
    if K.shape != (data.n, data.n):
        raise DimensionError(f"K_tilde must be {data.n} x {data.n}, got {K.shape}")
    if d > data.p:
        raise ConfigError(f"dim {d} exceeds feature count {data.p}")
    Xv = data.values
    U, ev = _top_eigen(Xv.T @ K @ Xv, d)
    return SubspaceResult(name, U, Xv @ U, ev)


def _spca(Xv: np.ndarray, grams, specs):
    return [_top_eigen(A, s.dim) for A, s in zip(grams, specs)]


def init_order(X, specs: Sequence[SubspaceSpec]) -> List[int]:
    """Update order by descending supervision strength of the standalone sPCA fits.

    Strength is the unnormalized HSIC between each ``lam = 0`` solution and its
    target; ties keep declaration order.
    """
    if not specs:
        raise ConfigError("at least one subspace spec is required")
    data = _as_data(X)
    grams = [_supervision_gram(data.values, s.target) for s in specs]
    strength = [float(np.sum(ev)) for _, ev in _spca(data.values, grams, specs)]
    return sorted(range(len(specs)), key=lambda j: -strength[j])


def fit_linear(X, specs: Sequence[SubspaceSpec], config: Optional[FitConfig] = None) -> FittedModel:
    """Fit sisPCA with linear latent kernels by alternating eigendecomposition."""
    config = config or FitConfig()
    data = _as_data(X)
    specs = tuple(specs)
    _check_specs(specs, data)
    for s in specs:
        if s.latent_kernel != "linear":
            raise ConfigError(f"subspace {s.name!r}: fit_linear requires linear latent kernels")
    Xv = data.values
    m = len(specs)
    lam = float(config.lam)

    grams = [_supervision_gram(Xv, s.target) for s in specs]
    init = _spca(Xv, grams, specs)
    if config.init_ordering == "auto":
        strength = [float(np.sum(ev)) for _, ev in init]
        order = sorted(range(m), key=lambda j: -strength[j])
    else:
        order = list(range(m))

    U = [u for u, _ in init]
    ev = [e for _, e in init]
    # P_i = X^T Z_i, so X^T K_Zi X = P_i P_i^T
    P = [Xv.T @ (Xv @ u) for u in U]

    def value():
        sup = sum(float(np.sum(U[j] * (grams[j] @ U[j]))) for j in range(m))
        Z = [Xv @ u for u in U]
        dis = sum(float(np.sum((Z[i].T @ Z[j]) ** 2)) for j in range(m) for i in range(j + 1, m))
        return sup - lam * dis

    trace = [value()]
    converged = False
    n_iter = 0
    for n_iter in range(1, config.max_iter + 1):
        for j in order:
            M = grams[j].copy()
            for i in range(m):
                if i != j:
                    M -= lam * (P[i] @ P[i].T)
            U[j], ev[j] = _top_eigen(M, specs[j].dim)
            P[j] = Xv.T @ (Xv @ U[j])
        trace.append(value())
        if abs(trace[-1] - trace[-2]) / max(1.0, abs(trace[-1])) < config.rel_tol:
            converged = True
            break

    results = []
    for s, u, e in zip(specs, U, ev):
        _warn_collapsed(s.name, e)
        results.append(SubspaceResult(s.name, u, Xv @ u, e))
    return FittedModel(
        subspaces=tuple(results),
        objective_trace=np.asarray(trace),
        config=config,
        data_summary=_summary(data),
        specs=specs,
        order=tuple(order),
        converged=converged,
        n_iter=n_iter,
    )


# ---------------------------------------------------------------------------
# sisPCA-general


def polar_factor(A: np.ndarray) -> np.ndarray:
    """Nearest matrix with orthonormal columns (Frobenius norm)."""
    P, _, Qt = np.linalg.svd(A, full_matrices=False)
    return P @ Qt


def general_loss_and_grad(Xv, Us, target_kernels, specs, lam, bandwidths):
    """Loss ``-sum_j HSIC(Z_j, Y_j) + lam * sum_{i>j} HSIC(Z_i, Z_j)`` and its gradient.

    Scaled by ``1/(n-1)^2``. ``target_kernels`` are centered ``n x n`` arrays;
    ``bandwidths[j]`` is the Gaussian scale for Gaussian subspaces.
    Returns ``(loss, [dL/dU_j])``.
    """
    n = Xv.shape[0]
    c = float((n - 1) ** 2)
    m = len(Us)
    Zs = [Xv @ U for U in Us]
    Ks = [_latent_kernel(Z, s, w) for Z, s, w in zip(Zs, specs, bandwidths)]
    Kc = [_backend.double_center(K) for K in Ks]

    loss = -sum(float(np.sum(Kc[j] * target_kernels[j])) for j in range(m))
    loss += lam * sum(float(np.sum(Ks[i] * Kc[j])) for j in range(m) for i in range(j + 1, m))

    grads = []
    for j in range(m):
        G = -target_kernels[j]
        for i in range(m):
            if i != j:
                G = G + lam * Kc[i]
        if specs[j].latent_kernel == "linear":
            dZ = 2.0 * (G @ Zs[j])
        else:
            w = bandwidths[j]
            dZ = _backend.gaussian_grad(Zs[j], Ks[j], G, w * w)
        grads.append(Xv.T @ dZ / c)
    return loss / c, grads


def _rotate_to_axes(Xv, U, KYc):
    """Rotate ``U`` within its span so score axes are ordered by target alignment.

    Both latent kernels are invariant to such rotations.
    """
    Z = Xv @ U
    w, R = np.linalg.eigh(0.5 * ((Z.T @ KYc @ Z) + (Z.T @ KYc @ Z).T))
    order = np.lexsort((np.arange(len(w)), -w))
    U = _sign_fix(U @ R[:, order])
    return U, w[order]


def _diverged(it: int, lr: float) -> str:
    return f"loss diverged at iteration {it}; try a smaller learning_rate (currently {lr})"


def fit_general(X, specs: Sequence[SubspaceSpec], config: Optional[FitConfig] = None) -> FittedModel:
    """Fit sisPCA with arbitrary latent kernels by projected gradient descent.

    Gaussian bandwidths given as "median" are fixed from the initial scores.
    Convergence is not guaranteed; check ``model.converged``.
    """
    config = config or FitConfig(algorithm="general")
    data = _as_data(X)
    specs = tuple(specs)
    _check_specs(specs, data)
    if all(s.latent_kernel == "linear" for s in specs):
        warnings.warn("fit_general with only linear latent kernels; fit_linear is exact and faster",
                      RuntimeWarning, stacklevel=2)
    Xv = data.values
    n = data.n
    lam = float(config.lam)
    rng = np.random.default_rng(config.seed)

    KY = [center_kernel(s.target.kernel(n)).values for s in specs]
    if config.init == "spca":
        grams = [_supervision_gram(Xv, s.target) for s in specs]
        Us = [u for u, _ in _spca(Xv, grams, specs)]
    else:
        Us = [_sign_fix(polar_factor(rng.standard_normal((data.p, s.dim)))) for s in specs]
    bws = []
    for s, U in zip(specs, Us):
        bws.append(bandwidth(Xv @ U, s.width) if s.latent_kernel == "gaussian" else None)

    loss, grads = general_loss_and_grad(Xv, Us, KY, specs, lam, bws)
    if not np.isfinite(loss):
        raise NumericalError("initial loss is not finite; check the data scale")
    c = float((n - 1) ** 2)
    trace = [-loss * c]
    converged = False
    n_iter = 0
    for n_iter in range(1, config.max_iter + 1):
        steps = [U - config.learning_rate * g for U, g in zip(Us, grads)]
        if not all(np.all(np.isfinite(S)) for S in steps):
            raise NumericalError(_diverged(n_iter, config.learning_rate))
        Us = [polar_factor(S) for S in steps]
        new_loss, grads = general_loss_and_grad(Xv, Us, KY, specs, lam, bws)
        if not np.isfinite(new_loss) or not all(np.all(np.isfinite(g)) for g in grads):
            raise NumericalError(_diverged(n_iter, config.learning_rate))
        trace.append(-new_loss * c)
        delta = abs(new_loss - loss)
        loss = new_loss
        if delta <= config.rel_tol * max(abs(loss), np.finfo(float).tiny):
            converged = True
            break

    results = []
    for s, U, K in zip(specs, Us, KY):
        U, ev = _rotate_to_axes(Xv, U, K)
        results.append(SubspaceResult(s.name, U, Xv @ U, ev))
    return FittedModel(
        subspaces=tuple(results),
        objective_trace=np.asarray(trace),
        config=config,
        data_summary=_summary(data),
        specs=specs,
        order=tuple(range(len(specs))),
        converged=converged,
        n_iter=n_iter,
        bandwidths=tuple(bws),
    )


def fit(X, specs: Sequence[SubspaceSpec], config: Optional[FitConfig] = None) -> FittedModel:
    """Dispatch to :func:`fit_linear` or :func:`fit_general` by ``config.algorithm``."""
    config = config or FitConfig()
    if config.algorithm == "general":
        return fit_general(X, specs, config)
    return fit_linear(X, specs, config)


# ---------------------------------------------------------------------------
# inspection


def transform(model: FittedModel, X_new) -> List[np.ndarray]:
    """Project raw rows with the stored preprocessing and loadings."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    p = model.data_summary["p"]
    if X_new.shape[1] != p:
        raise DimensionError(f"expected {p} columns, got {X_new.shape[1]}")
    Xp = (X_new - model.data_summary["means"]) / model.data_summary["scales"]
    return [Xp @ s.U for s in model.subspaces]


class FeatureLoading(NamedTuple):
    index: int
    name: str
    loading: float


def top_features(result: SubspaceResult, component: int, k: int, feature_names=None) -> List[FeatureLoading]:
    """Features ranked by ``|loading|`` on one component; ties go to the lower index."""
    d = result.U.shape[1]
    if not 0 <= component < d:
        raise IndexError(f"component {component} out of range for dim {d}")
    col = result.U[:, component]
    p = len(col)
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    order = np.lexsort((np.arange(p), -np.abs(col)))[: max(0, min(k, p))]
    return [FeatureLoading(int(i), names[i], float(col[i])) for i in order]


def with_scores(model: FittedModel, scores: Sequence[np.ndarray]) -> FittedModel:
    """Copy of ``model`` with score matrices replaced (used to score ground truth)."""
    subs = tuple(replace(s, Z=np.asarray(z, dtype=np.float64)) for s, z in zip(model.subspaces, scores))
    return replace(model, subspaces=subs)
