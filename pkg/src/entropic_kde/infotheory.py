"""Entropy and KL divergence (in bits) of gridded densities.

The array-level helpers treat ``p`` and ``q`` as densities over cells of a
common ``area``; with ``area=1`` they reduce to the discrete formulas used for
probability vectors such as normalized periodograms.
"""

from __future__ import annotations

import numpy as np

from .density import DensityGrid
from .errors import ParameterError

REGULARIZATION = 1e-3


def entropy_values(p, area: float = 1.0) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log2(p[nz])) * area)


def kl_values(p, q, area: float = 1.0) -> float:
    """``sum p log2(p / q) * area`` over cells with ``p > 0``; ``inf`` if some such ``q == 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ParameterError(f"shape mismatch: {p.shape} vs {q.shape}")
    nz = p > 0
    if np.any(q[nz] <= 0):
        return float("inf")
    return float(np.sum(p[nz] * (np.log2(p[nz]) - np.log2(q[nz]))) * area)


def regularize(p, area: float = 1.0, weight: float = REGULARIZATION, renormalize: bool = True):
    """Add ``weight * max(p)`` to every cell, optionally restoring unit mass."""
    p = np.asarray(p, dtype=np.float64)
    out = p + weight * p.max()
    if renormalize:
        out = out / (out.sum() * area)
    return out


def symmetrized_kl_values(p, q, area: float = 1.0, weight: float = REGULARIZATION,
                          renormalize: bool = True) -> float:
    pr = regularize(p, area, weight, renormalize)
    qr = regularize(q, area, weight, renormalize)
    return 0.5 * (kl_values(pr, qr, area) + kl_values(qr, pr, area))


def _check_specs(p: DensityGrid, q: DensityGrid):
    if p.spec != q.spec:
        raise ParameterError("densities must share one GridSpec")


def entropy(grid: DensityGrid) -> float:
    """Differential entropy ``-sum p log2 p dx dy`` (``0 log 0 = 0``)."""
    return entropy_values(grid.values, grid.spec.cell_area)


def kl_divergence(p: DensityGrid, q: DensityGrid) -> float:
    """``D(p || q)`` in bits; ``inf`` when ``p`` has mass where ``q`` has none."""
    _check_specs(p, q)
    return kl_values(p.values, q.values, p.spec.cell_area)


def symmetrized_kl_regularized(p: DensityGrid, q: DensityGrid, weight: float = REGULARIZATION,
                               renormalize: bool = True) -> float:
    """Average of both KL directions after lifting each density by ``weight * max``.

    The lift removes zero cells, so the result is always finite. With
    ``renormalize`` (the default) both lifted densities are rescaled to unit
    mass before the divergences are taken.
    """
    _check_specs(p, q)
    return symmetrized_kl_values(p.values, q.values, p.spec.cell_area, weight, renormalize)
