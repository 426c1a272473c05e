"""Entropy of kernel density estimates over delay embeddings, and change detection.

The main entry points:

* :func:`takens_embed` and :func:`estimate_kde` build a gridded density from
  a scalar series.
* :func:`kdee_profile` sweeps the embedding delay and reports ΔKE.
* :func:`detect` runs a sliding-baseline detector over windows of a series.
* :mod:`entropic_kde.simulators` generates the RF, sinusoid and Lorenz
  test signals, and :mod:`entropic_kde.evaluation` scores and sweeps them.
"""

__version__ = "0.1.0"

from .density import DensityGrid, GridSpec, KernelModel, estimate_kde, median_grid, shared_grid
from .detector import DetectionReport, WindowConfig, detect, merge_flags, modified_z_scores
from .embedding import PointCloud, delay_pairs, takens_embed
from .errors import (
    DegenerateScaleWarning,
    DivergenceError,
    EntropicKDEError,
    InsufficientDataError,
    ParameterError,
    ParseError,
    ValidationError,
)
from .infotheory import entropy, kl_divergence, symmetrized_kl_regularized
from .kdee import KdeeProfile, delta_ke, kdee_profile, ke_tau
from .timeseries import LabeledInterval, LabeledRecord, TimeSeries, read_record, write_record

__all__ = [
    "DegenerateScaleWarning", "DensityGrid", "DetectionReport", "DivergenceError",
    "EntropicKDEError", "GridSpec", "InsufficientDataError", "KdeeProfile", "KernelModel",
    "LabeledInterval", "LabeledRecord", "ParameterError", "ParseError", "PointCloud",
    "TimeSeries", "ValidationError", "WindowConfig", "delay_pairs", "delta_ke", "detect",
    "entropy", "estimate_kde", "kdee_profile", "ke_tau", "kl_divergence", "median_grid",
    "merge_flags", "modified_z_scores", "read_record", "shared_grid",
    "symmetrized_kl_regularized", "takens_embed", "write_record",
]
