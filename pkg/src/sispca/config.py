"""Declarative experiment configuration (YAML).

Grammar::

    data:
      path: data.csv            # or ``source: breast_cancer`` for the bundled dataset
      delimiter: ","
      has_header: true
      id_column: null           # optional row-identifier column
      features: null            # explicit feature list; default = every unused column
      exclude: []               # columns dropped from the default feature list
      targets_path: null        # optional file holding target columns (same row order)
    preprocess:
      center: true              # always true; kept for explicitness
      scale: false              # unit-variance features
      scale_targets: false      # unit-variance continuous target columns
    subspaces:
      - name: radius
        dim: 3
        target: {columns: [radius_mean, radius_se]}   # or {labels: diagnosis} or none
        kernel: auto            # auto | delta | linear
        latent_kernel: linear   # linear | gaussian
        width: median           # Gaussian bandwidth parameter w, or "median"
    fit: {lambda: 10, max_iter: 100, rel_tol: 1.0e-7, algorithm: linear, ...}
    tune:
      grid: [0, 1, 10]          # or "default", or {low, high, num, include_zero}
      n_clusters: auto
    metrics:
      silhouette_labels: null   # column scored against each subspace
      silhouette_components: 3
      spearman_targets: []      # columns scored by max |Spearman| per subspace

``auto`` resolves to the delta kernel when any target column is non-numeric
and to the linear kernel otherwise.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .model import FitConfig, LATENT_KERNELS
from .tuning import LambdaGrid

TARGET_KERNELS = ("auto", "delta", "linear")
BUILTIN_SOURCES = ("breast_cancer",)


@dataclass
class DataSection:
    path: Optional[str] = None
    source: Optional[str] = None
    delimiter: str = ","
    has_header: bool = True
    id_column: Optional[str] = None
    features: Optional[List[str]] = None
    exclude: List[str] = field(default_factory=list)
    targets_path: Optional[str] = None


@dataclass
class PreprocessSection:
    center: bool = True
    scale: bool = False
    scale_targets: bool = False


@dataclass
class SubspaceSection:
    name: str
    dim: int
    columns: Optional[List[str]] = None  # None means "none" (identity target)
    kernel: str = "auto"
    latent_kernel: str = "linear"
    width: Any = "median"

    def target_dict(self):
        if self.columns is None:
            return "none"
        if self.kernel == "delta" and len(self.columns) == 1:
            return {"labels": self.columns[0]}
        return {"columns": list(self.columns)}


@dataclass
class TuneSection:
    grid: List[float]
    n_clusters: Any = "auto"


@dataclass
class MetricsSection:
    silhouette_labels: Optional[str] = None
    silhouette_components: int = 3
    spearman_targets: List[str] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    data: DataSection
    subspaces: List[SubspaceSection]
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    fit: FitConfig = field(default_factory=FitConfig)
    tune: Optional[TuneSection] = None
    metrics: MetricsSection = field(default_factory=MetricsSection)
    base_dir: str = "."

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        subs = []
        for s in self.subspaces:
            d = {"name": s.name, "dim": s.dim, "target": s.target_dict(), "kernel": s.kernel,
                 "latent_kernel": s.latent_kernel, "width": s.width}
            subs.append(d)
        out = {
            "data": asdict(self.data),
            "preprocess": asdict(self.preprocess),
            "subspaces": subs,
            "fit": self.fit.to_dict(),
            "metrics": asdict(self.metrics),
        }
        if self.tune is not None:
            out["tune"] = {"grid": list(self.tune.grid), "n_clusters": self.tune.n_clusters}
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)

    def canonical_hash(self) -> str:
        """SHA-256 of the canonical JSON form (independent of YAML layout)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def resolve(self, path: Optional[str]) -> Optional[str]:
        if path is None or os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.base_dir, path))


# -- parsing ---------------------------------------------------------------


def _section(raw: dict, key: str, cls, required=False):
    val = raw.get(key)
    if val is None:
        if required:
            raise ConfigError(f"config section {key!r} is required")
        return cls()
    if not isinstance(val, dict):
        raise ConfigError(f"config section {key!r} must be a mapping")
    unknown = set(val) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
    return cls(**val)


def _as_list(v, what: str) -> List[str]:
    if isinstance(v, str):
        return [v]
    if isinstance(v, (list, tuple)) and v and all(isinstance(x, str) for x in v):
        return list(v)
    raise ConfigError(f"{what} must be a column name or a non-empty list of names")


def _parse_subspace(i: int, raw) -> SubspaceSection:
    if not isinstance(raw, dict):
        raise ConfigError(f"subspace #{i} must be a mapping")
    allowed = {"name", "dim", "target", "kernel", "latent_kernel", "width"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"subspace #{i}: unknown keys {sorted(unknown)}")
    if "name" not in raw or "dim" not in raw:
        raise ConfigError(f"subspace #{i}: 'name' and 'dim' are required")
    dim = raw["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"subspace {raw['name']!r}: dim must be a positive integer")
    kernel = raw.get("kernel", "auto")
    if kernel not in TARGET_KERNELS:
        raise ConfigError(f"subspace {raw['name']!r}: kernel must be one of {TARGET_KERNELS}")
    latent = raw.get("latent_kernel", "linear")
    if latent not in LATENT_KERNELS:
        raise ConfigError(f"subspace {raw['name']!r}: latent_kernel must be one of {LATENT_KERNELS}")

    target = raw.get("target", "none")
    if target is None or target == "none":
        columns = None
    elif isinstance(target, dict) and set(target) == {"labels"}:
        columns = _as_list(target["labels"], "target.labels")
        if kernel == "linear":
            raise ConfigError(f"subspace {raw['name']!r}: a labels target cannot use the linear kernel")
        kernel = "delta"
    elif isinstance(target, dict) and set(target) == {"columns"}:
        columns = _as_list(target["columns"], "target.columns")
    else:
        raise ConfigError(f"subspace {raw['name']!r}: target must be 'none', {{columns: [...]}} or {{labels: col}}")
    width = raw.get("width", "median")
    if width != "median" and not (isinstance(width, (int, float)) and width > 0):
        raise ConfigError(f"subspace {raw['name']!r}: width must be 'median' or a positive number")
    return SubspaceSection(str(raw["name"]), dim, columns, kernel, latent, width)


def parse_grid(spec) -> List[float]:
    if spec is None or spec == "default":
        return list(LambdaGrid.default().values)
    if isinstance(spec, dict):
        unknown = set(spec) - {"low", "high", "num", "include_zero"}
        if unknown:
            raise ConfigError(f"unknown grid keys {sorted(unknown)}")
        num = int(spec.get("num", 19))
        low, high = float(spec.get("low", 1e-2)), float(spec.get("high", 1e2))
        if num < 1 or low <= 0 or high < low:
            raise ConfigError("grid needs num >= 1 and 0 < low <= high")
        vals = list(np.logspace(np.log10(low), np.log10(high), num))
        if spec.get("include_zero", True):
            vals = [0.0] + vals
        return [float(v) for v in vals]
    if isinstance(spec, (list, tuple)):
        try:
            vals = [float(v) for v in spec]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid values must be numbers: {spec}") from exc
        LambdaGrid(tuple(vals))  # validates
        return vals
    raise ConfigError("tune.grid must be a list, 'default', or a {low, high, num} mapping")


def from_dict(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    unknown = set(raw) - {"data", "preprocess", "subspaces", "fit", "tune", "metrics"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    raw = copy.deepcopy(raw)
    data = _section(raw, "data", DataSection, required=True)
    if (data.path is None) == (data.source is None):
        raise ConfigError("data needs exactly one of 'path' or 'source'")
    if data.source is not None and data.source not in BUILTIN_SOURCES:
        raise ConfigError(f"unknown data source {data.source!r}; available: {BUILTIN_SOURCES}")
    if data.features is not None:
        data.features = _as_list(data.features, "data.features")
    data.exclude = list(data.exclude or [])

    pre = _section(raw, "preprocess", PreprocessSection)
    if pre.center is not True:
        raise ConfigError("preprocess.center cannot be disabled; data are always centered")

    subs_raw = raw.get("subspaces")
    if not isinstance(subs_raw, list) or not subs_raw:
        raise ConfigError("'subspaces' must be a non-empty list")
    subs = [_parse_subspace(i, s) for i, s in enumerate(subs_raw)]
    names = [s.name for s in subs]
    if len(set(names)) != len(names):
        raise ConfigError(f"subspace names must be unique, got {names}")

    try:
        fit = FitConfig.from_dict(raw.get("fit") or {})
    except TypeError as exc:
        raise ConfigError(f"invalid fit section: {exc}") from exc

    tune = None
    if raw.get("tune") is not None:
        t = raw["tune"]
        if not isinstance(t, dict) or set(t) - {"grid", "n_clusters"}:
            raise ConfigError("tune must be a mapping with keys 'grid' and optional 'n_clusters'")
        n_clusters = t.get("n_clusters", "auto")
        if n_clusters != "auto" and not (isinstance(n_clusters, int) and n_clusters >= 1):
            raise ConfigError("tune.n_clusters must be 'auto' or a positive integer")
        tune = TuneSection(parse_grid(t.get("grid")), n_clusters)

    metrics = _section(raw, "metrics", MetricsSection)
    metrics.spearman_targets = list(metrics.spearman_targets or [])
    return ExperimentConfig(data, subs, pre, fit, tune, metrics, base_dir)


def loads(text: str, base_dir: str = ".") -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(raw, base_dir)


def load(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return loads(text, base_dir=os.path.dirname(os.path.abspath(path)))
