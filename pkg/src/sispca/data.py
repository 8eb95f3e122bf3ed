"""Observation matrix with recorded centering and scaling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class DataMatrix:
    """Column-centered (optionally unit-variance) ``n x p`` data.

    ``values`` holds the preprocessed matrix; ``means`` and ``scales`` map raw
    rows into that space via ``(x - means) / scales``.
    """

    values: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    feature_names: tuple = ()

    @classmethod
    def from_array(
        cls,
        X,
        scale: bool = False,
        feature_names: Optional[Sequence[str]] = None,
    ) -> "DataMatrix":
        if isinstance(X, DataMatrix):
            return X
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"data must be 2-D, got shape {X.shape}")
        if X.shape[0] < 2:
            raise DimensionError("need at least 2 observations")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[:10].tolist()
            raise ConfigError(f"data contains NaN/Inf at (row, col) {bad}")
        means = X.mean(axis=0)
        Xc = X - means
        scales = np.ones(X.shape[1])
        if scale:
            sd = Xc.std(axis=0)
            scales = np.where(sd > 0, sd, 1.0)
            Xc = Xc / scales
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(X.shape[1])]
        elif len(feature_names) != X.shape[1]:
            raise DimensionError("feature_names length does not match column count")
        return cls(Xc, means, scales, tuple(str(f) for f in feature_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def apply(self, X_new) -> np.ndarray:
        """Map raw rows into the preprocessed space of this matrix."""
        X_new = np.asarray(X_new, dtype=np.float64)
        if X_new.ndim == 1:
            X_new = X_new[None, :]
        if X_new.shape[1] != self.p:
            raise DimensionError(f"expected {self.p} columns, got {X_new.shape[1]}")
        return (X_new - self.means) / self.scales
