"""Window-level F1 scoring, experiment sweeps and timing.

Sweeps derive one seed per (grid point, format, trial) from a root seed, so
their results do not depend on the order in which records are processed.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .detector import METHOD_REPRESENTATION, DetectionReport, WindowConfig, detect
from .errors import ParameterError
from .kdee import kdee_profile
from .rng import derive_seed
from .simulators import FORMAT_NAMES, RfSimConfig, make_injection_record, noisy_signal
from .timeseries import LabeledInterval, LabeledRecord, as_samples, atomic_write

DEFAULT_SNR_GRID = tuple(range(-10, 12, 3))
DEFAULT_SNR_SIR_GRID = tuple(range(-10, 11, 2))
DEFAULT_METHODS = ("kl-kde", "kl-psd", "delta-ke")
OVERLAP_DENOMINATORS = ("window", "truth")


@dataclass(frozen=True)
class F1Result:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "F1Result":
        tp, fp, fn = int(tp), int(fp), int(fn)
        if min(tp, fp, fn) < 0:
            raise ParameterError("counts must be nonnegative")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision, recall, f1, tp, fp, fn)

    def to_dict(self):
        return asdict(self)


def positive_truth(windows, truth: Iterable[LabeledInterval], min_overlap: float = 0.25,
                   denominator: str = "window") -> np.ndarray:
    """Mark windows overlapping some truth interval by at least ``min_overlap``.

    ``windows`` is a sequence of ``(start, length)`` pairs. With
    ``denominator="window"`` the overlap is measured as a fraction of the
    window length; with ``"truth"`` as a fraction of the interval length. The
    comparison is inclusive.
    """
    if denominator not in OVERLAP_DENOMINATORS:
        raise ParameterError(f"denominator must be one of {OVERLAP_DENOMINATORS}")
    truth = list(truth)
    out = np.zeros(len(windows), dtype=bool)
    for i, (start, length) in enumerate(windows):
        for iv in truth:
            ov = iv.overlap(start, start + length)
            ref = length if denominator == "window" else len(iv)
            if ov > 0 and ov >= min_overlap * ref:
                out[i] = True
                break
    return out


def f1_overlap(windows, flagged, truth: Iterable[LabeledInterval], min_overlap: float = 0.25,
               denominator: str = "window") -> F1Result:
    """Window-level F1 of ``flagged`` against truth intervals.

    Parameters
    ----------
    windows : sequence of (start, length)
        Every analysed window, flagged or not.
    flagged : sequence of bool
        Detector decision per window.
    truth : iterable of LabeledInterval
    min_overlap : float
        Minimum overlap fraction for a window to count as a true change.
    """
    flagged = np.asarray(flagged, dtype=bool)
    if flagged.shape != (len(windows),):
        raise ParameterError("flagged must have one entry per window")
    pos = positive_truth(windows, truth, min_overlap, denominator)
    return F1Result.from_counts(np.sum(flagged & pos), np.sum(flagged & ~pos),
                                np.sum(~flagged & pos))


def score_report(report: DetectionReport, truth, min_overlap: float = 0.25,
                 denominator: str = "window") -> F1Result:
    windows = [(int(s), report.window_len) for s in report.window_starts]
    return f1_overlap(windows, report.flagged, truth, min_overlap, denominator)


def false_alarm_rate(report: DetectionReport) -> float:
    """Fraction of scored windows flagged (meaningful on change-free records)."""
    scored = np.asarray(report.scored, dtype=bool)
    return float(np.mean(report.flagged[scored])) if scored.any() else 0.0


@dataclass(frozen=True)
class SweepPoint:
    group: str
    axis_value: float
    mean: float
    std: float
    trials: int
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("a sweep point needs at least one trial")


@dataclass(frozen=True)
class SweepResult:
    """Per-point mean and population standard deviation of a metric."""

    axis: str
    metric: str
    points: tuple
    config: dict = field(default_factory=dict)

    def groups(self):
        return tuple(dict.fromkeys(p.group for p in self.points))

    def curve(self, group):
        pts = sorted((p for p in self.points if p.group == group), key=lambda p: p.axis_value)
        if not pts:
            raise ParameterError(f"no sweep points for group {group!r}")
        return (np.array([p.axis_value for p in pts]), np.array([p.mean for p in pts]),
                np.array([p.std for p in pts]))

    def point(self, group, axis_value) -> SweepPoint:
        for p in self.points:
            if p.group == group and math.isclose(p.axis_value, axis_value):
                return p
        raise ParameterError(f"no sweep point ({group!r}, {axis_value})")

    def csv_rows(self):
        yield ["group", self.axis, f"mean_{self.metric}", f"std_{self.metric}", "trials"]
        for p in self.points:
            yield [p.group, repr(float(p.axis_value)), repr(p.mean), repr(p.std), p.trials]

    def write_csv(self, path):
        with atomic_write(path) as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())


def _aggregate(group, axis_value, values) -> SweepPoint:
    v = np.asarray(values, dtype=np.float64)
    return SweepPoint(group, float(axis_value), float(np.mean(v)), float(np.std(v)), v.size,
                      tuple(float(a) for a in v))


def _run(jobs: Sequence[Callable[[], float]], workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: job(), jobs))
    return [job() for job in jobs]


def _check_formats(formats):
    formats = tuple(FORMAT_NAMES if formats is None else formats)
    if not formats:
        raise ParameterError("need at least one modulation format")
    return formats


def sweep_delta_ke(formats=None, snr_grid=DEFAULT_SNR_GRID, trials: int = 10,
                   decimations=(1, 2, 3, 4), length: int = 3000, seed: int = 0,
                   tau_max: int = 50, cells: int = 64, workers: int = 1) -> SweepResult:
    """ΔKE of noisy modulated signals against SNR, per decimation factor.

    Each signal is ``length`` samples of a modulated carrier plus white
    Gaussian noise at the grid SNR. The signal is decimated by plain
    subsampling before the ΔKE profile is computed. Groups are named
    ``"decimation=<d>"``; each point pools ``trials * len(formats)`` signals.
    """
    formats = _check_formats(formats)
    base = RfSimConfig()
    if trials < 1 or length % base.samples_per_symbol:
        raise ParameterError(
            f"need trials >= 1 and length a multiple of {base.samples_per_symbol}"
        )
    cfg = RfSimConfig(symbols=length // base.samples_per_symbol)
    snr_grid = tuple(float(s) for s in snr_grid)

    def job(fmt, si, snr, trial, dec):
        def run():
            s = derive_seed(seed, "delta-ke", si, fmt, trial)
            x = noisy_signal(fmt, snr, cfg, s).decimate(dec)
            return kdee_profile(x, tau_max, cells, cells).delta_ke
        return run

    keys, jobs = [], []
    for dec in decimations:
        for si, snr in enumerate(snr_grid):
            for fmt in formats:
                for trial in range(trials):
                    keys.append((dec, snr))
                    jobs.append(job(fmt, si, snr, trial, dec))
    values = _run(jobs, workers)
    points = []
    for dec in decimations:
        for snr in snr_grid:
            v = [val for key, val in zip(keys, values) if key == (dec, snr)]
            points.append(_aggregate(f"decimation={dec}", snr, v))
    config = dict(formats=list(formats), snr_grid=list(snr_grid), trials=trials,
                  decimations=list(decimations), length=length, seed=seed, tau_max=tau_max,
                  cells=cells)
    return SweepResult("snr_db", "delta_ke", tuple(points), config)


def method_config(method: str, base: WindowConfig | None = None) -> WindowConfig:
    """Window configuration for a named method (``kl-kde``, ``kl-psd``, ``delta-ke``)."""
    key = str(method).lower()
    if key not in METHOD_REPRESENTATION:
        raise ParameterError(f"unknown method {method!r}; choose from {', '.join(METHOD_REPRESENTATION)}")
    return (base or WindowConfig()).with_(representation=METHOD_REPRESENTATION[key])


def detection_record(fmt, level_db: float, seed: int, index: int, trial: int,
                     inject: bool = True) -> LabeledRecord:
    """Injection record for one sweep cell with SNR = SIR = ``level_db``."""
    s = derive_seed(seed, "detection", index, fmt, trial)
    return make_injection_record(fmt, RfSimConfig(snr_db=level_db, sir_db=level_db), s, inject)


def sweep_detection(formats=None, snr_sir_grid=DEFAULT_SNR_SIR_GRID, trials: int = 10,
                    methods=DEFAULT_METHODS, seed: int = 0, window: WindowConfig | None = None,
                    min_overlap: float = 0.25, denominator: str = "window",
                    workers: int = 1) -> SweepResult:
    """Window-level F1 of each method against SNR = SIR.

    Every (level, format, trial) record is analysed by every method; the F1
    scores of all formats at a level are pooled into one mean and standard
    deviation per method.
    """
    formats = _check_formats(formats)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    cfgs = {m: method_config(m, window) for m in methods}
    grid = tuple(float(v) for v in snr_sir_grid)

    def job(index, level, fmt, trial):
        def run():
            rec = detection_record(fmt, level, seed, index, trial)
            return {m: score_report(detect(rec.series, c), rec.truth, min_overlap,
                                    denominator).f1 for m, c in cfgs.items()}
        return run

    keys, jobs = [], []
    for index, level in enumerate(grid):
        for fmt in formats:
            for trial in range(trials):
                keys.append(level)
                jobs.append(job(index, level, fmt, trial))
    results = _run(jobs, workers)
    points = []
    for m in methods:
        for level in grid:
            v = [r[m] for key, r in zip(keys, results) if key == level]
            points.append(_aggregate(m, level, v))
    config = dict(formats=list(formats), snr_sir_grid=list(grid), trials=trials,
                  methods=list(methods), seed=seed, min_overlap=min_overlap,
                  denominator=denominator, window=(window or WindowConfig()).to_dict())
    return SweepResult("snr_plus_sir_db", "f1", tuple(points), config)


@dataclass(frozen=True)
class Timing:
    mean_s: float
    std_s: float
    samples: tuple


def time_method(method: str, record, repeats: int = 5, warmup: int = 1,
                window: WindowConfig | None = None) -> Timing:
    """Wall-clock seconds of one full sliding-window analysis of ``record``."""
    if repeats < 1 or warmup < 0:
        raise ParameterError("need repeats >= 1 and warmup >= 0")
    cfg = method_config(method, window)
    x = as_samples(record.series if isinstance(record, LabeledRecord) else record)
    for _ in range(warmup):
        detect(x, cfg)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        detect(x, cfg)
        samples.append(time.perf_counter() - t0)
    return Timing(float(np.mean(samples)), float(np.std(samples)), tuple(samples))


def spearman(x, y) -> float:
    """Spearman rank correlation; ``nan`` if either input is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return float("nan")
    return float(spearmanr(x, y).statistic)
