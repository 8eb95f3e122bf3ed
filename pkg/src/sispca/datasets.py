"""Public datasets used in examples and reproduction tests."""
from __future__ import annotations

import pandas as pd

_SUFFIX = {"mean": "mean", "error": "se", "worst": "worst"}


def _kaggle_name(name: str) -> str:
    # sklearn: "mean radius", "radius error", "worst radius" -> radius_mean, radius_se, radius_worst
    words = name.split()
    if words[0] in ("mean", "worst"):
        stat, base = words[0], words[1:]
    else:
        stat, base = words[-1], words[:-1]
    return "_".join(base) + "_" + _SUFFIX[stat]


def load_breast_cancer_frame() -> pd.DataFrame:
    """Wisconsin diagnostic breast cancer data with Kaggle-style column names.

    Columns: ``diagnosis`` ("M"/"B") followed by the 30 real-valued features
    (``radius_mean``, ``radius_se``, ``radius_worst``, ...). Uses the copy
    bundled with scikit-learn, so no download is needed.
    """
    from sklearn.datasets import load_breast_cancer

    raw = load_breast_cancer()
    df = pd.DataFrame(raw.data, columns=[_kaggle_name(c) for c in raw.feature_names])
    # sklearn encodes malignant as 0
    df.insert(0, "diagnosis", ["M" if t == 0 else "B" for t in raw.target])
    return df


BRCA_RADIUS_TARGETS = ("radius_mean", "radius_se")
BRCA_SYMMETRY_TARGETS = ("symmetry_mean", "symmetry_se")
