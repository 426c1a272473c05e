"""KDE entropy of delay embeddings across time scales.

``ke_tau`` is the entropy of the KDE of one delay embedding; ``kdee_profile``
sweeps the delay from 1 to ``tau_max`` with a fixed delay upper bound so every
cloud has the same number of points, and reports the spread
``delta_ke = max - min``. Structured signals unfold as the delay grows and give
a large spread; white noise gives a small one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .density import DEFAULT_CELLS, estimate_kde
from .embedding import delay_pairs
from .errors import InsufficientDataError, ValidationError
from .infotheory import entropy
from .timeseries import as_samples

DEFAULT_TAU_MAX = 50


@dataclass(frozen=True)
class KdeeProfile:
    taus: tuple
    ke_values: tuple
    delta_ke: float

    def __post_init__(self):
        if len(self.taus) != len(self.ke_values) or not self.taus:
            raise ValidationError("taus and ke_values must be non-empty and equally long")
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ValidationError("taus must be strictly increasing")

    def to_rows(self):
        return list(zip(self.taus, self.ke_values))


def ke_tau(series, tau: int, n_max: int, nx: int = DEFAULT_CELLS, ny: int = DEFAULT_CELLS) -> float:
    """Entropy (bits) of the KDE of the ``tau``-delay embedding."""
    cloud = delay_pairs(as_samples(series), tau, n_max)
    return entropy(estimate_kde(cloud, nx=nx, ny=ny))


def kdee_profile(series, tau_max: int = DEFAULT_TAU_MAX, nx: int = DEFAULT_CELLS,
                 ny: int = DEFAULT_CELLS, workers: int = 1) -> KdeeProfile:
    """Evaluate :func:`ke_tau` for ``tau = 1 .. tau_max`` with ``n_max = tau_max``."""
    x = as_samples(series)
    if x.size <= tau_max:
        raise InsufficientDataError(
            f"series of length {x.size} is too short for tau_max={tau_max}"
        )
    taus = tuple(range(1, int(tau_max) + 1))

    def one(tau):
        return ke_tau(x, tau, tau_max, nx, ny)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = tuple(pool.map(one, taus))
    else:
        values = tuple(one(t) for t in taus)
    arr = np.asarray(values)
    return KdeeProfile(taus, values, float(arr.max() - arr.min()))


def delta_ke(series, tau_max: int = DEFAULT_TAU_MAX, nx: int = DEFAULT_CELLS,
             ny: int = DEFAULT_CELLS) -> float:
    return kdee_profile(series, tau_max, nx, ny).delta_ke
