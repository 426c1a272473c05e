"""Noisy sinusoids and the sin -> |sin| structural-change record."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..rng import stream
from ..timeseries import LabeledInterval, LabeledRecord, TimeSeries

CHANGE_LABEL = "change"


def clean_sine(freq_hz, amplitude, length, sample_rate_hz):
    i = np.arange(length)
    return amplitude * np.sin(2 * np.pi * freq_hz * i / sample_rate_hz)


def sine_record(freq_hz: float, amplitude: float = 1.0, noise_sigma: float = 0.0,
                length: int = 1000, seed: int = 0, sample_rate_hz: float = 1.0) -> TimeSeries:
    """``amplitude * sin(2 pi f i / fs)`` plus white Gaussian noise."""
    if length < 1:
        raise ParameterError("length must be positive")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be non-negative")
    x = clean_sine(freq_hz, amplitude, length, sample_rate_hz)
    if noise_sigma > 0:
        x = x + noise_sigma * stream(seed, "sine-noise").standard_normal(length)
    return TimeSeries(x, sample_rate_hz)


def abs_sine_insert(series: TimeSeries, start: int, length: int, freq_hz: float,
                    amplitude: float = 1.0, noise_sigma: float = 0.0,
                    seed: int = 0) -> LabeledRecord:
    """Replace ``[start, start + length)`` with ``|clean sine|`` plus fresh noise."""
    n = len(series)
    if start < 0 or length < 1 or start + length > n:
        raise ParameterError(f"insert [{start}, {start + length}) out of range for length {n}")
    x = series.samples.copy()
    clean = clean_sine(freq_hz, amplitude, n, series.sample_rate_hz)
    seg = np.abs(clean[start:start + length])
    if noise_sigma > 0:
        seg = seg + noise_sigma * stream(seed, "insert-noise").standard_normal(length)
    x[start:start + length] = seg
    truth = (LabeledInterval(start, start + length, CHANGE_LABEL),)
    return LabeledRecord(TimeSeries(x, series.sample_rate_hz), truth,
                         {"generator": "abs-sine-insert", "seed": int(seed)})


def structural_change_record(seed: int = 0, periods: int = 24, samples_per_period: int = 128,
                             insert_period: int = 16, insert_periods: int = 1,
                             noise_sigma: float = 0.05) -> LabeledRecord:
    """``sin(2 pi t)`` sampled at ``samples_per_period`` Hz with a ``|sin|`` stretch."""
    fs = float(samples_per_period)
    length = periods * samples_per_period
    base = sine_record(1.0, 1.0, noise_sigma, length, seed, fs)
    rec = abs_sine_insert(base, insert_period * samples_per_period,
                          insert_periods * samples_per_period, 1.0, 1.0, noise_sigma, seed)
    meta = dict(rec.meta, periods=periods, samples_per_period=samples_per_period,
                insert_period=insert_period, noise_sigma=noise_sigma)
    return LabeledRecord(rec.series, rec.truth, meta)
