"""Gaussian kernel density estimation of 2-D point clouds on a rectangular grid.

The estimator follows the usual plug-in convention: the kernel covariance is
the sample covariance of the cloud scaled by the squared Scott factor
``n ** (-1 / (d + 4))``. Densities are evaluated at cell centers and the grid
is then renormalized so that ``sum(values) * dx * dy == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import gaussian_mixture_grid
from .embedding import PointCloud
from .errors import InsufficientDataError, ParameterError, ValidationError
from .timeseries import atomic_write

DEFAULT_CELLS = 128
EXPANSION_BANDWIDTHS = 3.0
# Below this fraction of unit mass the kernels are narrower than a cell (or
# off-grid) and point sampling is meaningless; fall back to a histogram.
_MIN_CAPTURED_MASS = 1e-3


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid: lower-left corner ``(x0, y0)``, cell sizes, cell counts."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int = DEFAULT_CELLS
    ny: int = DEFAULT_CELLS

    def __post_init__(self):
        for name in ("x0", "y0", "dx", "dy"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ParameterError(f"GridSpec.{name} must be finite")
            object.__setattr__(self, name, v)
        if self.dx <= 0 or self.dy <= 0:
            raise ParameterError(f"cell sizes must be positive, got dx={self.dx}, dy={self.dy}")
        if int(self.nx) < 2 or int(self.ny) < 2:
            raise ParameterError(f"grid needs at least 2x2 cells, got {self.nx}x{self.ny}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def shape(self):
        return (self.nx, self.ny)

    def x_centers(self):
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self):
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy

    def shifted(self, cx, cy):
        return GridSpec(self.x0 + cx, self.y0 + cy, self.dx, self.dy, self.nx, self.ny)

    def refined(self, factor=2):
        return GridSpec(self.x0, self.y0, self.dx / factor, self.dy / factor,
                        self.nx * factor, self.ny * factor)

    def cell_of(self, x, y):
        """Index of the cell containing ``(x, y)``, clipped to the grid."""
        i = int(np.clip(math.floor((x - self.x0) / self.dx), 0, self.nx - 1))
        j = int(np.clip(math.floor((y - self.y0) / self.dy), 0, self.ny - 1))
        return i, j


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Probability density sampled on a :class:`GridSpec`.

    ``values[i, j]`` is the density at the center of x-cell ``i``, y-cell ``j``.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.shape != self.spec.shape:
            raise ValidationError(f"values shape {vals.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError("density values must be finite and non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def integral(self):
        return float(self.values.sum() * self.spec.cell_area)

    def normalized(self) -> "DensityGrid":
        total = self.integral()
        if total <= 0:
            raise ValidationError("cannot normalize a grid with zero mass")
        return DensityGrid(self.spec, self.values / total)

    def argmax_center(self):
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.spec.x_centers()[i]), float(self.spec.y_centers()[j])

    def to_csv(self, path):
        """Dump the value matrix (rows = x cells) with the grid geometry as a comment."""
        s = self.spec
        header = f"x0={s.x0!r},y0={s.y0!r},dx={s.dx!r},dy={s.dy!r},nx={s.nx},ny={s.ny}"
        with atomic_write(path) as fh:
            np.savetxt(fh, self.values, delimiter=",", fmt="%.17g", header=header)


def scott_bandwidth(n: int, d: int = 2) -> float:
    """Scott's rule factor ``n ** (-1 / (d + 4))``."""
    if n < 2:
        raise ParameterError(f"bandwidth needs at least 2 points, got {n}")
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    return float(n) ** (-1.0 / (d + 4))


def _points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"expected an (n, 2) point array, got shape {pts.shape}")
    return pts


def regularized_covariance(pts: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance, ridged when (near-)singular."""
    cov = np.cov(pts, rowvar=False) if pts.shape[0] > 1 else np.zeros((2, 2))
    eig = np.linalg.eigvalsh(cov)
    if eig[-1] <= 0 or eig[0] <= 1e-12 * eig[-1]:
        cov = cov + 1e-9 * (np.trace(cov) + 1.0) * np.eye(2)
    return cov


@dataclass(frozen=True, eq=False)
class KernelModel:
    """Everything needed to evaluate one cloud's KDE on any grid."""

    points: np.ndarray
    covariance: np.ndarray  # kernel covariance h^2 * C
    precision: np.ndarray
    norm: float

    @classmethod
    def fit(cls, cloud) -> "KernelModel":
        pts = np.ascontiguousarray(_points(cloud))
        n = pts.shape[0]
        if n < 3:
            raise InsufficientDataError(f"KDE needs at least 3 points, got {n}")
        h = scott_bandwidth(n, 2)
        kcov = h * h * regularized_covariance(pts)
        det = float(np.linalg.det(kcov))
        precision = np.linalg.inv(kcov)
        norm = 1.0 / (n * 2.0 * math.pi * math.sqrt(det))
        return cls(pts, kcov, precision, norm)

    @property
    def expansion(self):
        """Grid margin: three kernel standard deviations along the widest axis."""
        return EXPANSION_BANDWIDTHS * math.sqrt(float(np.linalg.eigvalsh(self.covariance)[-1]))

    def evaluate(self, spec: GridSpec) -> np.ndarray:
        """Raw (unnormalized) mixture density at the cell centers of ``spec``."""
        p = self.precision
        return gaussian_mixture_grid(
            self.points[:, 0].copy(), self.points[:, 1].copy(),
            float(p[0, 0]), float(p[0, 1]), float(p[1, 1]), self.norm,
            spec.x0, spec.y0, spec.dx, spec.dy, spec.nx, spec.ny,
        )

    def grid(self, spec: GridSpec) -> DensityGrid:
        values = self.evaluate(spec)
        mass = values.sum() * spec.cell_area
        if not (mass >= _MIN_CAPTURED_MASS and np.isfinite(mass)):
            values = _histogram(self.points, spec)
            mass = values.sum() * spec.cell_area
        return DensityGrid(spec, values / mass)


def _histogram(pts, spec):
    counts = np.zeros(spec.shape)
    for x, y in pts:
        counts[spec.cell_of(x, y)] += 1.0
    return counts


def _bbox_spec(lo, hi, margin, nx, ny) -> GridSpec:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    extent = hi - lo
    lo, hi = lo - margin, hi + margin
    width = hi - lo
    for axis in range(2):
        if not extent[axis] > 1e-12 * max(1.0, abs(lo[axis]) + abs(hi[axis])):
            center = 0.5 * (lo[axis] + hi[axis])
            lo[axis], width[axis] = center - 0.5, 1.0
    return GridSpec(lo[0], lo[1], width[0] / nx, width[1] / ny, nx, ny)


def auto_grid(cloud, nx: int = DEFAULT_CELLS, ny: int = DEFAULT_CELLS) -> GridSpec:
    """Bounding box of ``cloud`` padded by three kernel standard deviations.

    A cloud with zero extent along an axis gets a unit-width extent centered
    on it.
    """
    pts = _points(cloud)
    if pts.shape[0] < 1:
        raise InsufficientDataError("cannot build a grid for an empty cloud")
    margin = KernelModel.fit(pts).expansion if pts.shape[0] >= 3 else 0.0
    return _bbox_spec(pts.min(axis=0), pts.max(axis=0), margin, nx, ny)


def shared_grid(models: Sequence[KernelModel], nx: int = DEFAULT_CELLS,
                ny: int = DEFAULT_CELLS, snap: int | None = None) -> GridSpec:
    """Union bounding box of several fitted clouds, padded by the widest margin.

    With ``snap=k`` each padded axis is widened outward to multiples of the
    largest power of two not exceeding ``width / k``. Overlapping groups of
    clouds then usually resolve to the identical grid, which lets callers
    cache evaluated densities; the box grows by at most ``2 / k`` of its width.
    """
    if not models:
        raise ParameterError("shared_grid needs at least one cloud")
    lo = np.min([m.points.min(axis=0) for m in models], axis=0)
    hi = np.max([m.points.max(axis=0) for m in models], axis=0)
    margin = max(m.expansion for m in models)
    spec = _bbox_spec(lo, hi, margin, nx, ny)
    if snap is None:
        return spec
    if snap < 1:
        raise ParameterError(f"snap must be a positive integer, got {snap}")
    lo = np.array([spec.x0, spec.y0])
    hi = lo + np.array([spec.dx * nx, spec.dy * ny])
    step = 2.0 ** np.floor(np.log2((hi - lo) / snap))
    lo = np.floor(lo / step) * step
    hi = np.ceil(hi / step) * step
    return GridSpec(lo[0], lo[1], (hi[0] - lo[0]) / nx, (hi[1] - lo[1]) / ny, nx, ny)


def estimate_kde(cloud, spec: GridSpec | None = None, nx: int = DEFAULT_CELLS,
                 ny: int = DEFAULT_CELLS) -> DensityGrid:
    """Gaussian KDE of a 2-D cloud evaluated on ``spec`` (default: :func:`auto_grid`).

    Parameters
    ----------
    cloud : PointCloud or (n, 2) array
        At least 3 points.
    spec : GridSpec, optional
        Evaluation grid. When omitted, an ``nx`` by ``ny`` grid is fitted to
        the cloud.

    Returns
    -------
    DensityGrid
        Normalized so that ``values.sum() * dx * dy == 1``.
    """
    model = KernelModel.fit(cloud)
    if spec is None:
        spec = _bbox_spec(model.points.min(axis=0), model.points.max(axis=0),
                          model.expansion, nx, ny)
    return model.grid(spec)


def median_grid(grids: Sequence[DensityGrid]) -> DensityGrid:
    """Cellwise median of grids sharing one spec, renormalized to unit mass."""
    grids = list(grids)
    if not grids:
        raise ParameterError("median_grid needs at least one grid")
    spec = grids[0].spec
    for g in grids[1:]:
        if g.spec != spec:
            raise ParameterError("median_grid inputs must share one GridSpec")
    stacked = np.stack([g.values for g in grids])
    return DensityGrid(spec, np.median(stacked, axis=0)).normalized()
