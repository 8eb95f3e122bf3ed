"""Synthetic data with three independent 2-D latent subspaces mixed into 20-D.

* S1: equal mixture of two isotropic Gaussians (binary label known).
* S2: jittered points on a regular grid (both coordinates known).
* S3: a noisy unit ring (angle unknown to the model).

Each component draws from its own child stream of ``SeedSequence(seed)``, so
the mixing matrix depends on the seed alone and not on ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy.linalg import orthogonal_procrustes

from .errors import ConfigError, DimensionError
from .metrics import silhouette

N_FEATURES = 20


@dataclass(frozen=True)
class SimulationOptions:
    gaussian_offset: float = 3.0
    gaussian_sd: float = 1.0
    grid_span: float = 3.0
    grid_jitter: float = 0.1
    ring_radius: float = 1.0
    ring_jitter: float = 0.05
    observation_noise: float = 0.0


@dataclass(frozen=True)
class SyntheticDataset:
    X: np.ndarray
    latents: Dict[str, np.ndarray]
    labels_S1: np.ndarray
    coords_S2: np.ndarray
    angle_S3: np.ndarray
    mixing: np.ndarray
    seed: int
    options: SimulationOptions = field(default_factory=SimulationOptions)

    @property
    def n(self) -> int:
        return self.X.shape[0]


def generate(n: int, seed: int = 0, options: SimulationOptions | None = None, **kw) -> SyntheticDataset:
    """Draw ``n`` samples; keyword arguments override fields of :class:`SimulationOptions`."""
    if n < 10:
        raise DimensionError("simulation needs n >= 10")
    opts = options or SimulationOptions()
    if kw:
        opts = SimulationOptions(**{**opts.__dict__, **kw})
    s1_rng, s2_rng, s3_rng, mix_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)
    )

    labels = s1_rng.integers(0, 2, size=n)
    centers = np.where(labels[:, None] == 1, opts.gaussian_offset, -opts.gaussian_offset) * np.array([1.0, 0.0])
    S1 = centers + opts.gaussian_sd * s1_rng.standard_normal((n, 2))

    g = math.ceil(math.sqrt(n))
    ticks = np.linspace(-opts.grid_span, opts.grid_span, g)
    cells = s2_rng.integers(0, g, size=(n, 2))
    S2 = ticks[cells] + opts.grid_jitter * s2_rng.standard_normal((n, 2))

    phi = s3_rng.uniform(0.0, 2.0 * np.pi, size=n)
    radius = opts.ring_radius + opts.ring_jitter * s3_rng.standard_normal(n)
    S3 = np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])

    mixing = mix_rng.uniform(0.0, 1.0, size=(6, N_FEATURES))
    X = np.hstack([S1, S2, S3]) @ mixing
    if opts.observation_noise > 0:
        X = X + opts.observation_noise * noise_rng.standard_normal(X.shape)
    return SyntheticDataset(
        X=X,
        latents={"S1": S1, "S2": S2, "S3": S3},
        labels_S1=labels,
        coords_S2=S2.copy(),
        angle_S3=phi,
        mixing=mixing,
        seed=seed,
        options=opts,
    )


def procrustes_r2(Z, target) -> float:
    """R^2 of the best orthogonal-plus-scale map from centered ``Z`` onto centered ``target``."""
    Z = np.asarray(Z, dtype=np.float64)
    T = np.asarray(target, dtype=np.float64)
    k = T.shape[1]
    if Z.shape[1] < k:
        raise DimensionError(f"need at least {k} score columns, got {Z.shape[1]}")
    Zc = Z[:, :k] - Z[:, :k].mean(axis=0)
    Tc = T - T.mean(axis=0)
    R, sv_sum = orthogonal_procrustes(Zc, Tc)
    zz = float(np.sum(Zc * Zc))
    if zz == 0:
        return 0.0
    fitted = (sv_sum / zz) * (Zc @ R)
    return 1.0 - float(np.sum((fitted - Tc) ** 2)) / float(np.sum(Tc * Tc))


def circular_correlation(alpha, beta) -> float:
    """Circular correlation coefficient of two angle samples (Jammalamadaka-SenGupta)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    a = np.sin(alpha - np.angle(np.mean(np.exp(1j * alpha))))
    b = np.sin(beta - np.angle(np.mean(np.exp(1j * beta))))
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / denom) if denom > 0 else 0.0


def score_angle(Z) -> np.ndarray:
    """Angle of each sample in the whitened plane of the first two score axes."""
    Z = np.asarray(Z, dtype=np.float64)[:, :2]
    Zc = Z - Z.mean(axis=0)
    cov = Zc.T @ Zc / len(Zc)
    w, V = np.linalg.eigh(cov)
    W = V @ np.diag(1.0 / np.sqrt(np.maximum(w, np.finfo(float).tiny))) @ V.T
    Zw = Zc @ W
    return np.arctan2(Zw[:, 1], Zw[:, 0])


def recovery_score(model, truth: SyntheticDataset) -> Dict[str, float]:
    """Score a 3-subspace model (S1, S2, S3 in declaration order) against ground truth."""
    subs = model.subspaces if hasattr(model, "subspaces") else model
    if len(subs) != 3:
        raise ConfigError(f"recovery scoring needs exactly 3 subspaces, got {len(subs)}")
    Zs = [s.Z if hasattr(s, "Z") else np.asarray(s) for s in subs]
    if any(Z.shape[0] != truth.n for Z in Zs):
        raise ConfigError("score rows do not match the dataset")
    if Zs[2].shape[1] < 2:
        raise ConfigError("S3 subspace needs at least 2 dimensions")
    return {
        "s1_silhouette": silhouette(Zs[0][:, : min(3, Zs[0].shape[1])], truth.labels_S1),
        "s2_procrustes_r2": procrustes_r2(Zs[1], truth.coords_S2),
        "s3_angle_circular_corr": abs(circular_correlation(score_angle(Zs[2]), truth.angle_S3)),
    }
