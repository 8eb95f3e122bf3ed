"""Supervised independent subspace PCA.

Decomposes a data matrix into several linear subspaces, each aligned with a
supervision target through HSIC and kept independent of the others by an
HSIC penalty of strength ``lam``.
"""
__version__ = "0.1.0"

from ._backend import NAME as KERNEL_BACKEND
from .data import DataMatrix
from .errors import ConfigError, DimensionError, NumericalError, SisPCAError, UndefinedMetricError
from .kernels import (
    KernelMatrix,
    SupervisionTarget,
    center_kernel,
    delta_kernel,
    gaussian_kernel,
    hsic,
    linear_kernel,
)
from .metrics import (
    fubini_study_affinity,
    grassmann_geodesic,
    max_abs_spearman,
    principal_angles,
    silhouette,
    subspace_hsic_report,
)
from .model import (
    FitConfig,
    FittedModel,
    SubspaceResult,
    SubspaceSpec,
    eigen_update,
    fit,
    fit_general,
    fit_linear,
    init_order,
    objective,
    top_features,
    transform,
)
from .tuning import LambdaGrid, lambda_scan, model_affinity, spectral_cluster

__all__ = [
    "KERNEL_BACKEND",
    "ConfigError",
    "DataMatrix",
    "DimensionError",
    "FitConfig",
    "FittedModel",
    "KernelMatrix",
    "LambdaGrid",
    "NumericalError",
    "SisPCAError",
    "SubspaceResult",
    "SubspaceSpec",
    "SupervisionTarget",
    "UndefinedMetricError",
    "center_kernel",
    "delta_kernel",
    "eigen_update",
    "fit",
    "fit_general",
    "fit_linear",
    "fubini_study_affinity",
    "gaussian_kernel",
    "grassmann_geodesic",
    "hsic",
    "init_order",
    "lambda_scan",
    "linear_kernel",
    "max_abs_spearman",
    "model_affinity",
    "objective",
    "principal_angles",
    "silhouette",
    "spectral_cluster",
    "subspace_hsic_report",
    "top_features",
    "transform",
]
