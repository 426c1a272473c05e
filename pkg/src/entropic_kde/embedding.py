"""Two-dimensional delay (Takens) embedding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ParameterError, ValidationError
from .timeseries import as_samples


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered set of 2-D points, stored as a read-only ``(n, 2)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValidationError(f"point cloud must have shape (n>=1, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    __hash__ = None


def delay_pairs(x: np.ndarray, tau: int, n_max: int) -> np.ndarray:
    """Array version of :func:`takens_embed`; returns an ``(t - n_max, 2)`` array."""
    if isinstance(tau, bool) or isinstance(n_max, bool):
        raise ParameterError("tau and n_max must be integers")
    tau, n_max = int(tau), int(n_max)
    if tau < 1 or n_max < 1:
        raise ParameterError(f"tau and n_max must be positive, got tau={tau}, n_max={n_max}")
    if tau > n_max:
        raise ParameterError(f"tau={tau} exceeds the delay upper bound n_max={n_max}")
    t = x.size
    count = t - n_max
    if count < 1:
        raise InsufficientDataError(f"series of length {t} is too short for n_max={n_max}")
    return np.column_stack((x[:count], x[tau:tau + count]))


def takens_embed(series, tau: int, n_max: int) -> PointCloud:
    """Embed ``series`` as the points ``(x_i, x_{i+tau})`` for ``i < t - n_max``.

    The number of points depends on the delay upper bound ``n_max`` only, so
    clouds built for different ``tau`` with the same ``n_max`` have the same
    size.

    Parameters
    ----------
    series : TimeSeries or array-like
    tau : int
        Delay in samples, ``1 <= tau <= n_max``.
    n_max : int
        Delay upper bound.

    Examples
    --------
    >>> takens_embed([1, 2, 3, 4, 5], tau=2, n_max=2).points.tolist()
    [[1.0, 3.0], [2.0, 4.0], [3.0, 5.0]]
    """
    return PointCloud(delay_pairs(as_samples(series), tau, n_max))
