"""Noise, narrowband interference and injection records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..rng import stream
from ..timeseries import LabeledInterval, LabeledRecord, TimeSeries, as_samples
from .modulation import RfSimConfig, get_format, modulate, raised_cosine

INJECTION_LABEL = "injection"


def power(x) -> float:
    x = as_samples(x)
    return float(np.mean(x * x))


def awgn_sigma(signal, snr_db: float) -> float:
    """Noise standard deviation giving ``snr_db`` against ``signal``'s mean power."""
    p_signal = power(signal)
    if p_signal <= 0:
        raise ParameterError("signal has zero power; SNR is undefined")
    return math.sqrt(p_signal / 10.0 ** (snr_db / 10.0))


def gaussian_noise(n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """White Gaussian noise rescaled so its sample RMS is exactly ``sigma``."""
    w = rng.standard_normal(n)
    return w * (sigma / math.sqrt(np.mean(w * w)))


def subchannel_centers(cfg: RfSimConfig) -> np.ndarray:
    """Center frequencies of every interference sub-channel.

    ``cfg.bands`` bands of width ``cfg.band_width_hz`` are spread evenly over
    ``[interference_lo_hz, interference_hi_hz]`` with equal gaps between them.
    Sub-channels sit at the centers of equal slots within each band.
    """
    span = cfg.interference_hi_hz - cfg.interference_lo_hz
    occupied = cfg.bands * cfg.band_width_hz
    if occupied > span + 1e-9:
        raise ParameterError("interference bands do not fit into the configured span")
    gap = (span - occupied) / (cfg.bands - 1) if cfg.bands > 1 else 0.0
    slot = cfg.band_width_hz / cfg.subchannels_per_band
    centers = []
    for band in range(cfg.bands):
        lo = cfg.interference_lo_hz + band * (cfg.band_width_hz + gap)
        centers.extend(lo + slot * (k + 0.5) for k in range(cfg.subchannels_per_band))
    return np.asarray(centers)


def _narrowband(center_hz, cfg: RfSimConfig, n, rng):
    """Random-symbol BPSK at ``subchannel_symbol_rate_hz`` on ``center_hz``."""
    t = np.arange(n) / cfg.fs_hz
    period = 1.0 / cfg.subchannel_symbol_rate_hz
    offset = rng.uniform(0.0, period)
    phase = rng.uniform(0.0, 2 * np.pi)
    half = cfg.span_symbols // 2
    first = -half - 1
    last = int(math.ceil(t[-1] / period)) + half + 1
    symbols = rng.choice([-1.0, 1.0], size=last - first + 1)
    env = np.zeros(n)
    for m, a in zip(range(first, last + 1), symbols):
        env += a * raised_cosine((t - m * period - offset) / period, cfg.rolloff)
    return env * np.cos(2 * np.pi * center_hz * t + phase)


def interference_background(cfg: RfSimConfig | None = None, seed: int = 0,
                            injection_power: float = 1.0, length: int | None = None) -> TimeSeries:
    """Sum of independent narrowband sub-channels scaled to the target SIR.

    The summed background is rescaled to power
    ``injection_power / 10 ** (sir_db / 10)``.
    """
    cfg = cfg or RfSimConfig()
    n = cfg.length if length is None else int(length)
    if injection_power <= 0:
        raise ParameterError("injection power must be positive")
    total = np.zeros(n)
    for k, fc in enumerate(subchannel_centers(cfg)):
        b = _narrowband(fc, cfg, n, stream(seed, "interference", k))
        total += b / math.sqrt(np.mean(b * b))
    amplitude = math.sqrt(injection_power / 10.0 ** (cfg.sir_db / 10.0))
    return TimeSeries(total * (amplitude / math.sqrt(np.mean(total * total))), cfg.fs_hz)


@dataclass(frozen=True)
class InjectionComponents:
    signal: np.ndarray
    noise: np.ndarray
    interference: np.ndarray
    start: int
    end: int

    @property
    def background(self):
        return self.interference + self.noise

    def achieved_snr_db(self):
        return 10 * math.log10(power(self.signal) / power(self.noise))

    def achieved_sir_db(self):
        return 10 * math.log10(power(self.signal) / power(self.interference))


def place_injection(n: int, rng: np.random.Generator, min_frac=0.2, max_frac=0.4):
    """Random interval of length in ``[min_frac n, max_frac n]`` starting in the latter half."""
    length = int(rng.integers(math.ceil(min_frac * n), math.floor(max_frac * n), endpoint=True))
    first = n // 2
    last = n - length
    if last < first:
        return first, n
    start = int(rng.integers(first, last, endpoint=True))
    return start, start + length


def injection_components(format, cfg: RfSimConfig | None = None, seed: int = 0,
                         inject: bool = True) -> InjectionComponents:
    cfg = cfg or RfSimConfig()
    n = cfg.length
    signal = modulate(format, cfg, seed).samples
    p_inj = power(signal)
    noise = gaussian_noise(n, awgn_sigma(signal, cfg.snr_db), stream(seed, "noise"))
    interference = interference_background(cfg, seed, p_inj).samples
    if inject:
        start, end = place_injection(n, stream(seed, "placement"))
    else:
        start, end = 0, 0
    return InjectionComponents(signal, noise, interference, start, end)


def make_injection_record(format, cfg: RfSimConfig | None = None, seed: int = 0,
                          inject: bool = True) -> LabeledRecord:
    """Noise plus interference with a modulated burst over a random interval.

    Noise and interference are scaled independently against the (unit power)
    injection signal to hit ``cfg.snr_db`` and ``cfg.sir_db``. The burst lasts
    20-40% of the record and starts in its latter half. With ``inject=False``
    the record is background only and carries no interval.
    """
    cfg = cfg or RfSimConfig()
    fmt = get_format(format)
    parts = injection_components(fmt, cfg, seed, inject)
    x = parts.background
    truth = ()
    if inject:
        x = x.copy()
        x[parts.start:parts.end] += parts.signal[parts.start:parts.end]
        truth = (LabeledInterval(parts.start, parts.end, INJECTION_LABEL),)
    meta = {
        "generator": "rf-injection" if inject else "rf-background",
        "format": fmt.name,
        "seed": int(seed),
        "config": cfg.to_dict(),
        "achieved_snr_db": parts.achieved_snr_db(),
        "achieved_sir_db": parts.achieved_sir_db(),
    }
    return LabeledRecord(TimeSeries(x, cfg.fs_hz), truth, meta)


def noisy_signal(format, snr_db: float, cfg: RfSimConfig | None = None, seed: int = 0) -> TimeSeries:
    """Modulated signal plus white Gaussian noise at ``snr_db`` (no interference)."""
    cfg = cfg or RfSimConfig()
    signal = modulate(format, cfg, seed).samples
    noise = gaussian_noise(signal.size, awgn_sigma(signal, snr_db), stream(seed, "noise"))
    return TimeSeries(signal + noise, cfg.fs_hz)
