"""Table input and deterministic artifact output.

CSV files are comma-separated, UTF-8, LF line endings, one header row, and
numbers written with 17 significant digits so they parse back exactly.
JSON is written with sorted keys; non-finite floats become ``null``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import ExperimentConfig
from .data import DataMatrix
from .errors import ConfigError, DimensionError
from .kernels import SupervisionTarget
from .model import SubspaceSpec

FLOAT_FMT = "%.17g"


# -- writing ----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(path: str, header: Sequence[str], columns: Sequence[Sequence]) -> None:
    """Write column-major data; every column must have the same length."""
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise DimensionError(f"columns have different lengths: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    lines = [",".join(_fmt(h) for h in header)]
    for r in range(n):
        lines.append(",".join(_fmt(c[r]) for c in columns))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_matrix(path: str, M, header: Sequence[str], index: Optional[Sequence] = None,
                 index_name: str = "") -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    if len(header) != M.shape[1]:
        raise DimensionError("header length does not match matrix columns")
    cols: List[Sequence] = [list(M[:, j]) for j in range(M.shape[1])]
    if index is not None:
        write_csv(path, [index_name] + list(header), [list(index)] + cols)
    else:
        write_csv(path, header, cols)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def read_matrix(path: str, columns: Optional[Sequence[str]] = None, prefix: Optional[str] = None):
    """Read a numeric CSV into ``(matrix, header)``, optionally selecting columns."""
    df = read_table(path)
    if columns is not None:
        missing = [c for c in columns if c not in df.columns]
        if missing:
            raise ConfigError(f"{path}: missing columns {missing}")
        df = df[list(columns)]
    elif prefix is not None:
        sel = [c for c in df.columns if str(c).startswith(prefix + "_")]
        if not sel:
            raise ConfigError(f"{path}: no columns start with {prefix + '_'!r}")
        df = df[sel]
    return numeric_block(df, path), [str(c) for c in df.columns]


# -- reading ----------------------------------------------------------------


def read_table(path: str, delimiter: str = ",", has_header: bool = True) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, sep=delimiter, header=0 if has_header else None, dtype=str,
                         keep_default_na=False, na_values=[])
    except FileNotFoundError as exc:
        raise ConfigError(f"data file not found: {path}") from exc
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not has_header:
        df.columns = [f"c{i}" for i in range(df.shape[1])]
    df.columns = [str(c).strip() for c in df.columns]
    return df


_MISSING = {"", "na", "nan", "null", "none"}


def numeric_block(df: pd.DataFrame, what: str = "data") -> np.ndarray:
    """Convert string cells to float64, listing offending cells on failure."""
    out = np.empty(df.shape, dtype=np.float64)
    bad = []
    for j, col in enumerate(df.columns):
        for i, cell in enumerate(df[col].tolist()):
            s = str(cell).strip()
            try:
                if s.lower() in _MISSING:
                    raise ValueError
                v = float(s)
                if not math.isfinite(v):
                    raise ValueError
            except ValueError:
                bad.append(f"row {i + 1}, column {col!r}: {cell!r}")
                v = float("nan")
            out[i, j] = v
    if bad:
        shown = "; ".join(bad[:10]) + (f"; ... ({len(bad)} total)" if len(bad) > 10 else "")
        raise ConfigError(f"{what}: non-numeric or missing cells: {shown}")
    return out


def _is_numeric(series: pd.Series) -> bool:
    try:
        vals = [float(str(v).strip()) for v in series]
    except ValueError:
        return False
    return all(math.isfinite(v) for v in vals)


@dataclass
class Experiment:
    """Everything a run needs, resolved from an :class:`ExperimentConfig`."""

    config: ExperimentConfig
    data: DataMatrix
    specs: List[SubspaceSpec]
    ids: Optional[List[str]]
    frame: pd.DataFrame  # all columns as strings (data plus targets)


def _load_frames(cfg: ExperimentConfig):
    d = cfg.data
    if d.source == "breast_cancer":
        from .datasets import load_breast_cancer_frame

        df = load_breast_cancer_frame()
        df = df.apply(lambda c: c.map(_cell_str))  # string cells, like a CSV read
    else:
        df = read_table(cfg.resolve(d.path), d.delimiter, d.has_header)
    targets = None
    if d.targets_path:
        targets = read_table(cfg.resolve(d.targets_path), d.delimiter, d.has_header)
        if len(targets) != len(df):
            raise ConfigError(f"targets file has {len(targets)} rows, data has {len(df)}")
    return df, targets


def _cell_str(v) -> str:
    return FLOAT_FMT % v if isinstance(v, float) else str(v)


def load_experiment(cfg: ExperimentConfig) -> Experiment:
    df, targets = _load_frames(cfg)
    d = cfg.data
    if d.id_column is not None and d.id_column not in df.columns:
        raise ConfigError(f"id column {d.id_column!r} not found")
    ids = df[d.id_column].tolist() if d.id_column else None

    frame = df.copy()
    if targets is not None:
        for c in targets.columns:
            if c in frame.columns and c != d.id_column:
                raise ConfigError(f"column {c!r} appears in both data and targets files")
            if c != d.id_column:
                frame[c] = targets[c].values

    used = set()
    for s in cfg.subspaces:
        for c in s.columns or []:
            if c not in frame.columns:
                raise ConfigError(f"subspace {s.name!r}: target column {c!r} not found")
            used.add(c)
    for c in [cfg.metrics.silhouette_labels] + list(cfg.metrics.spearman_targets):
        if c is not None:
            if c not in frame.columns:
                raise ConfigError(f"metrics column {c!r} not found")
            used.add(c)

    if d.features is not None:
        missing = [c for c in d.features if c not in df.columns]
        if missing:
            raise ConfigError(f"feature columns not found: {missing}")
        feats = list(d.features)
    else:
        skip = used | set(d.exclude) | ({d.id_column} if d.id_column else set())
        missing = [c for c in d.exclude if c not in df.columns]
        if missing:
            raise ConfigError(f"excluded columns not found: {missing}")
        feats = [c for c in df.columns if c not in skip]
    if not feats:
        raise ConfigError("no feature columns selected")
    X = numeric_block(df[feats], "features")
    data = DataMatrix.from_array(X, scale=cfg.preprocess.scale, feature_names=feats)

    specs = []
    for s in cfg.subspaces:
        specs.append(SubspaceSpec(s.name, s.dim, _build_target(s, frame, cfg), s.latent_kernel, s.width))
    return Experiment(cfg, data, specs, ids, frame)


def _build_target(s, frame: pd.DataFrame, cfg: ExperimentConfig) -> SupervisionTarget:
    if s.columns is None:
        return SupervisionTarget.identity(s.name)
    sub = frame[s.columns]
    kernel = s.kernel
    if kernel == "auto":
        kernel = "linear" if all(_is_numeric(sub[c]) for c in s.columns) else "delta"
    if kernel == "delta":
        labels = ["\x1f".join(r) for r in sub.astype(str).itertuples(index=False, name=None)]
        return SupervisionTarget.categorical(np.asarray(labels), s.name)
    Y = numeric_block(sub, f"subspace {s.name!r} target")
    if cfg.preprocess.scale_targets:
        Y = Y - Y.mean(axis=0)
        sd = Y.std(axis=0)
        Y = Y / np.where(sd > 0, sd, 1.0)
    return SupervisionTarget.continuous(Y, s.name)


def column_values(frame: pd.DataFrame, col: str) -> np.ndarray:
    """A column as float64 when numeric, else as strings."""
    if _is_numeric(frame[col]):
        return numeric_block(frame[[col]], col)[:, 0]
    return np.asarray(frame[col].astype(str))


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path!r}: {exc}") from exc
    return path
