"""Fixed-step RK4 integration of the Lorenz system."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from ..errors import DivergenceError, ParameterError
from ..timeseries import TimeSeries


@dataclass(frozen=True)
class LorenzConfig:
    """Defaults sit in the type-I intermittent regime (rho = 166.18)."""

    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    rho: float = 166.18
    rate_hz: float = 150.0
    duration_s: float = 1000.0
    discard_s: float = 93.0
    initial_state: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ParameterError("rate_hz must be positive")
        if not 0 <= self.discard_s < self.duration_s:
            raise ParameterError("discard_s must be in [0, duration_s)")
        if len(self.initial_state) != 3:
            raise ParameterError("initial_state must have three components")

    @property
    def steps(self):
        return int(round(self.duration_s * self.rate_hz))

    @property
    def discard_samples(self):
        return int(math.ceil(self.discard_s * self.rate_hz - 1e-9))

    def to_dict(self):
        d = asdict(self)
        d["initial_state"] = list(self.initial_state)
        return d


def lorenz_rhs(sigma, rho, beta):
    """Right-hand side of the Lorenz system as a function of a state tuple."""

    def rhs(state):
        x, y, z = state
        return (sigma * (y - x), x * (rho - z) - y, x * y - beta * z)

    return rhs


def rk4_step(rhs, y, dt):
    """One classical fourth-order Runge-Kutta step for a tuple-valued state."""
    k1 = rhs(y)
    k2 = rhs(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)))
    k3 = rhs(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)))
    k4 = rhs(tuple(a + dt * b for a, b in zip(y, k3)))
    return tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def integrate(rhs, y0, dt, steps):
    """Fixed-step RK4; row ``k`` of the result is the state at ``t = k dt``."""
    y = tuple(float(v) for v in y0)
    out = np.empty((int(steps), len(y)))
    for k in range(int(steps)):
        out[k] = y
        y = rk4_step(rhs, y, dt)
        if not all(math.isfinite(v) for v in y):
            raise DivergenceError("integration produced a non-finite state", step=k)
    return out


def lorenz_trajectory(cfg: LorenzConfig | None = None) -> np.ndarray:
    cfg = cfg or LorenzConfig()
    return integrate(lorenz_rhs(cfg.sigma, cfg.rho, cfg.beta), cfg.initial_state,
                     1.0 / cfg.rate_hz, cfg.steps)


def lorenz_x(cfg: LorenzConfig | None = None) -> TimeSeries:
    """x component sampled at ``rate_hz`` after dropping the transient."""
    cfg = cfg or LorenzConfig()
    traj = lorenz_trajectory(cfg)
    return TimeSeries(traj[cfg.discard_samples:, 0], cfg.rate_hz)
