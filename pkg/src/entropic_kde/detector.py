"""Sliding-baseline change detection.

Each analysis window is turned into a representation (KDE of its delay
embedding, or a normalized periodogram), compared against the cellwise median
of the previous ``baseline_count`` windows with a regularized symmetrized KL
divergence, and the per-window divergences are scored with the modified
z-score ``0.6745 (x - median) / MAD``. A third variant scores each window's
ΔKE directly.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import get_window

from .density import KernelModel, median_grid, shared_grid
from .embedding import delay_pairs
from .errors import DegenerateScaleWarning, InsufficientDataError, ParameterError
from .infotheory import symmetrized_kl_regularized, symmetrized_kl_values
from .kdee import kdee_profile
from .timeseries import LabeledInterval, as_samples

logger = logging.getLogger(__name__)

MAD_CONSTANT = 0.6745
DETECTED_LABEL = "detected"
REPRESENTATIONS = ("kde", "psd", "delta_ke")
BASELINE_POLICIES = ("clean", "sliding")


def _canonical_representation(name):
    key = str(name).lower().replace("-", "_")
    aliases = {"kl_kde": "kde", "kl_psd": "psd", "deltake": "delta_ke"}
    key = aliases.get(key, key)
    if key not in REPRESENTATIONS:
        raise ParameterError(f"unknown representation {name!r}; choose kde, psd or delta-ke")
    return key


@dataclass(frozen=True)
class WindowConfig:
    """Windowing and scoring parameters.

    ``grid_cells`` sets the KDE grid used for each baseline comparison;
    ``delta_ke_cells`` and ``tau_max`` configure the per-window ΔKE sweep.
    ``two_sided=None`` picks the representation's default (one-sided for the
    KL detectors, two-sided for ΔKE). ``baseline`` selects ``"clean"``
    (iterated, flagged windows kept out of later baselines) or ``"sliding"``
    (always the ``W`` preceding windows). ``grid_snap`` widens comparison
    grids onto a coarse lattice so densities can be reused between
    comparisons; ``None`` uses the exact padded bounding box. ``scale_floor``
    bounds the MAD below by that fraction of the median statistic.
    """

    window_len: int = 256
    stride: int = 128
    baseline_count: int = 10
    z_threshold: float = 3.5
    representation: str = "kde"
    tau: int = 13
    grid_cells: int = 64
    tau_max: int = 25
    delta_ke_cells: int = 32
    two_sided: bool | None = None
    streaming: bool = False
    history: int = 50
    renormalize_regularized: bool = True
    baseline: str = "clean"
    max_passes: int = 10
    exclusion_run: int = 2
    grid_snap: int | None = 8
    scale_floor: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "representation", _canonical_representation(self.representation))
        if self.window_len < 1 or not 0 < self.stride <= self.window_len:
            raise ParameterError(
                f"need 0 < stride <= window_len, got stride={self.stride}, window={self.window_len}"
            )
        if self.baseline_count < 3:
            raise ParameterError(f"baseline_count must be >= 3, got {self.baseline_count}")
        if not self.z_threshold > 0:
            raise ParameterError(f"z_threshold must be positive, got {self.z_threshold}")
        if self.tau < 1 or self.window_len - self.tau < 3:
            raise ParameterError(f"tau={self.tau} leaves fewer than 3 points per window")
        if self.tau_max < 1 or self.window_len - self.tau_max < 3:
            raise ParameterError(f"tau_max={self.tau_max} leaves fewer than 3 points per window")
        if self.grid_cells < 2 or self.delta_ke_cells < 2:
            raise ParameterError("grids need at least 2 cells per axis")
        if self.history < 3:
            raise ParameterError("streaming history must hold at least 3 statistics")
        if self.baseline not in BASELINE_POLICIES:
            raise ParameterError(f"baseline must be one of {BASELINE_POLICIES}, got {self.baseline!r}")
        if self.max_passes < 1 or self.exclusion_run < 1:
            raise ParameterError("max_passes and exclusion_run must be >= 1")
        if not 0 <= self.scale_floor < 1:
            raise ParameterError(f"scale_floor must be in [0, 1), got {self.scale_floor}")

    @property
    def is_two_sided(self):
        if self.two_sided is not None:
            return bool(self.two_sided)
        return self.representation == "delta_ke"

    def with_(self, **changes) -> "WindowConfig":
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class DetectionReport:
    window_starts: np.ndarray
    window_len: int
    statistic: np.ndarray
    z_scores: np.ndarray
    flagged: np.ndarray
    intervals: tuple
    scored: np.ndarray
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.window_starts)
        for name in ("statistic", "z_scores", "flagged", "scored"):
            if len(getattr(self, name)) != n:
                raise ParameterError(f"report field {name!r} has the wrong length")

    def __len__(self):
        return len(self.window_starts)

    def csv_rows(self):
        yield ("start", "statistic", "z", "flag")
        for s, st, z, f in zip(self.window_starts, self.statistic, self.z_scores, self.flagged):
            yield (int(s), format(float(st), ".17g"), format(float(z), ".17g"), int(bool(f)))

    def to_json(self) -> dict:
        return {
            "window_len": int(self.window_len),
            "window_starts": [int(s) for s in self.window_starts],
            "statistic": [float(v) for v in self.statistic],
            "z_scores": [float(v) for v in self.z_scores],
            "flagged": [bool(f) for f in self.flagged],
            "scored": [bool(f) for f in self.scored],
            "intervals": [iv.to_dict() for iv in self.intervals],
            "config": self.config,
        }

    def same_as(self, other: "DetectionReport") -> bool:
        return json.dumps(self.to_json(), sort_keys=True) == json.dumps(other.to_json(), sort_keys=True)


def window_starts(length: int, window_len: int, stride: int) -> np.ndarray:
    if length < window_len:
        raise InsufficientDataError(
            f"series of length {length} is shorter than one window ({window_len})"
        )
    return np.arange(0, length - window_len + 1, stride)


def segment(series, cfg: WindowConfig) -> list[np.ndarray]:
    """Windows at starts ``0, stride, 2 stride, ...``; a trailing partial window is dropped."""
    x = as_samples(series)
    return [x[s:s + cfg.window_len] for s in window_starts(x.size, cfg.window_len, cfg.stride)]


def _median_and_mad(values):
    med = np.median(values)
    return med, np.median(np.abs(values - med))


def modified_z_scores(values) -> np.ndarray:
    """``0.6745 (x - median) / MAD``; all zeros (with a warning) when MAD is 0."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 3:
        raise ParameterError(f"modified z-scores need at least 3 values, got {x.size}")
    med, mad = _median_and_mad(x)
    if mad == 0:
        warnings.warn("median absolute deviation is zero; all z-scores set to 0",
                      DegenerateScaleWarning, stacklevel=2)
        return np.zeros_like(x)
    return MAD_CONSTANT * (x - med) / mad


def streaming_z_scores(values, history: int = 50) -> np.ndarray:
    """Score each value against the ``history`` values preceding it.

    Values with fewer than ``history`` predecessors get z = 0.
    """
    x = np.asarray(values, dtype=np.float64)
    z = np.zeros_like(x)
    for k in range(history, x.size):
        med, mad = _median_and_mad(x[k - history:k])
        if mad > 0:
            z[k] = MAD_CONSTANT * (x[k] - med) / mad
    return z


def merge_flags(flags, starts, window_len: int, label: str = DETECTED_LABEL) -> list[LabeledInterval]:
    """Merge each maximal run of consecutive flagged windows into one interval."""
    flags = [bool(f) for f in flags]
    starts = [int(s) for s in starts]
    if len(flags) != len(starts):
        raise ParameterError("flags and starts must be aligned")
    out = []
    run_start = None
    for k, f in enumerate(flags + [False]):
        if f and run_start is None:
            run_start = k
        elif not f and run_start is not None:
            out.append(LabeledInterval(starts[run_start], starts[k - 1] + window_len, label))
            run_start = None
    return out


def flags_from_intervals(intervals, starts, window_len: int) -> np.ndarray:
    """Inverse of :func:`merge_flags`: a window is flagged iff one interval contains it."""
    return np.array([
        any(iv.start <= s and s + window_len <= iv.end for iv in intervals) for s in starts
    ], dtype=bool)


def periodogram(window) -> np.ndarray:
    """One-sided periodogram of the mean-removed, Hann-tapered window.

    Scaled so that its sum equals the energy of the tapered window.
    """
    w = np.asarray(window, dtype=np.float64)
    n = w.size
    tapered = (w - w.mean()) * get_window("hann", n)
    p = np.abs(np.fft.rfft(tapered)) ** 2 / n
    if n % 2 == 0:
        p[1:-1] *= 2.0
    else:
        p[1:] *= 2.0
    return p


def _normalized(p):
    total = p.sum()
    if total <= 0:
        return np.full_like(p, 1.0 / p.size)
    return p / total


def _robust_z(values, reference, cfg: WindowConfig):
    """Modified z-scores of ``values`` located and scaled by ``reference``.

    The MAD is floored at ``cfg.scale_floor * |median|``: spreads below that
    are within the numerical resolution of a gridded divergence and carry no
    evidence of change. A zero scale gives all-zero scores and a
    :class:`DegenerateScaleWarning`.
    """
    med, mad = _median_and_mad(np.asarray(reference, dtype=np.float64))
    scale = max(mad, cfg.scale_floor * abs(med))
    if scale == 0:
        warnings.warn("median absolute deviation is zero; all z-scores set to 0",
                      DegenerateScaleWarning, stacklevel=3)
        return np.zeros_like(values, dtype=np.float64)
    return MAD_CONSTANT * (np.asarray(values, dtype=np.float64) - med) / scale


def _flags(z, scored, cfg: WindowConfig):
    exceed = np.abs(z) if cfg.is_two_sided else z
    return (exceed > cfg.z_threshold) & scored


def _score(statistic, scored, cfg: WindowConfig):
    """Modified z-scores over the scored windows and the resulting flags."""
    z = np.zeros_like(statistic)
    idx = np.flatnonzero(scored)
    if idx.size >= 3:
        values = statistic[idx]
        if cfg.streaming:
            for i in range(cfg.history, values.size):
                z[idx[i]] = _robust_z(values[i], values[i - cfg.history:i], cfg)
        else:
            z[idx] = _robust_z(values, values, cfg)
    return z, _flags(z, scored, cfg)


def _report(starts, statistic, scored, cfg: WindowConfig) -> DetectionReport:
    z, flagged = _score(statistic, scored, cfg)
    intervals = tuple(merge_flags(flagged, starts, cfg.window_len))
    return DetectionReport(starts, cfg.window_len, statistic, z, flagged, intervals, scored,
                           cfg.to_dict())


def _baseline_starts(x, cfg):
    starts = window_starts(x.size, cfg.window_len, cfg.stride)
    if starts.size < cfg.baseline_count + 1:
        raise InsufficientDataError(
            f"{starts.size} windows available; need at least baseline_count + 1 = "
            f"{cfg.baseline_count + 1}"
        )
    return starts


def _baseline_members(k, W, excluded):
    """Indices of the ``W`` most recent windows before ``k`` that are not excluded."""
    members = []
    j = k - 1
    while j >= 0 and len(members) < W:
        if not excluded[j]:
            members.append(j)
        j -= 1
    return members[::-1]


def _in_runs(flags, min_run):
    """``flags`` restricted to runs of at least ``min_run`` consecutive windows."""
    flags = np.asarray(flags, dtype=bool)
    out = np.zeros_like(flags)
    k = 0
    while k < flags.size:
        if not flags[k]:
            k += 1
            continue
        j = k
        while j < flags.size and flags[j]:
            j += 1
        if j - k >= min_run:
            out[k:j] = True
        k = j
    return out


def _run_baseline(n_windows, divergence, cfg: WindowConfig, starts):
    """Score windows against median baselines.

    ``divergence(k, members)`` returns the statistic of window ``k`` against
    the median of windows ``members``.

    ``"sliding"``: the baseline is the ``W`` preceding windows and z-scores
    use every scored window.

    ``"clean"``: the first ``W`` windows, assumed free of change, also get
    calibration statistics against a leave-one-out median of that block;
    these enter the z-score reference only. The record is then rescored
    with each baseline drawn from the ``W`` most recent windows outside the
    flagged runs of the previous pass, until the flags stop changing (at most
    ``max_passes``). Only runs of at least ``exclusion_run`` consecutive
    flagged windows are kept out of baselines; an isolated flag is left to the
    median, which tolerates a minority of outlying members.
    """
    W = cfg.baseline_count
    scored = np.arange(n_windows) >= W
    if cfg.streaming and cfg.baseline == "clean":
        statistic, z, flagged = _streaming_clean(n_windows, divergence, cfg)
    elif cfg.baseline == "sliding" or cfg.streaming:
        statistic = np.zeros(n_windows)
        for k in range(W, n_windows):
            statistic[k] = divergence(k, tuple(range(k - W, k)))
        z, flagged = _score(statistic, scored, cfg)
    else:
        statistic, z, flagged = _iterated_clean(n_windows, divergence, cfg, scored)
    intervals = tuple(merge_flags(flagged, starts, cfg.window_len))
    return DetectionReport(starts, cfg.window_len, statistic, z, flagged, intervals, scored,
                           cfg.to_dict())


def _iterated_clean(n_windows, divergence, cfg: WindowConfig, scored):
    W = cfg.baseline_count
    calibration = np.array([
        divergence(j, tuple(i for i in range(W) if i != j)) for j in range(W)
    ])
    excluded = np.zeros(n_windows, dtype=bool)
    cache = {}
    for _ in range(cfg.max_passes):
        statistic = np.zeros(n_windows)
        for k in range(W, n_windows):
            members = tuple(_baseline_members(k, W, excluded))
            if (k, members) not in cache:
                cache[(k, members)] = divergence(k, members)
            statistic[k] = cache[(k, members)]
        z = np.zeros(n_windows)
        z[scored] = _robust_z(statistic[scored],
                              np.concatenate([calibration, statistic[scored]]), cfg)
        flagged = _flags(z, scored, cfg)
        runs = _in_runs(flagged, cfg.exclusion_run)
        if np.array_equal(runs, excluded):
            break
        excluded = runs
    return statistic, z, flagged


def _streaming_clean(n_windows, divergence, cfg: WindowConfig):
    """Causal variant: each window is flagged as soon as it is scored.

    Baselines skip windows in flagged runs seen so far; z-scores use the
    ``history`` most recent statistics.
    """
    W = cfg.baseline_count
    statistic = np.zeros(n_windows)
    z = np.zeros(n_windows)
    flagged = np.zeros(n_windows, dtype=bool)
    for k in range(W, n_windows):
        excluded = _in_runs(flagged[:k], cfg.exclusion_run)
        statistic[k] = divergence(k, tuple(_baseline_members(k, W, excluded)))
        if k - W >= cfg.history:
            z[k] = _robust_z(statistic[k], statistic[k - cfg.history:k], cfg)
        exceed = abs(z[k]) if cfg.is_two_sided else z[k]
        flagged[k] = exceed > cfg.z_threshold
    return statistic, z, flagged


def detect_sliding_baseline(series, cfg: WindowConfig | None = None) -> DetectionReport:
    """KL divergence of each window's KDE from a median KDE of earlier windows.

    Every comparison evaluates the baseline clouds and the analysis window's
    cloud on one grid covering all of them. The first ``W`` windows have
    statistic 0 and are never flagged.
    """
    cfg = (cfg or WindowConfig()).with_(representation="kde")
    x = as_samples(series)
    starts = _baseline_starts(x, cfg)
    L, cells = cfg.window_len, cfg.grid_cells
    models = [KernelModel.fit(delay_pairs(x[s:s + L], cfg.tau, cfg.tau)) for s in starts]

    grids = {}

    def grid(j, spec):
        if (j, spec) not in grids:
            grids[(j, spec)] = models[j].grid(spec)
        return grids[(j, spec)]

    def divergence(k, members):
        spec = shared_grid([models[j] for j in (*members, k)], cells, cells, cfg.grid_snap)
        baseline = median_grid([grid(j, spec) for j in members])
        return symmetrized_kl_regularized(baseline, grid(k, spec),
                                          renormalize=cfg.renormalize_regularized)

    return _run_baseline(starts.size, divergence, cfg, starts)


def detect_psd_baseline(series, cfg: WindowConfig | None = None) -> DetectionReport:
    """As :func:`detect_sliding_baseline` with normalized periodograms in place of KDEs."""
    cfg = (cfg or WindowConfig()).with_(representation="psd")
    x = as_samples(series)
    starts = _baseline_starts(x, cfg)
    L = cfg.window_len
    spectra = np.array([_normalized(periodogram(x[s:s + L])) for s in starts])

    def divergence(k, members):
        baseline = _normalized(np.median(spectra[list(members)], axis=0))
        return symmetrized_kl_values(baseline, spectra[k], renormalize=cfg.renormalize_regularized)

    return _run_baseline(starts.size, divergence, cfg, starts)


def detect_delta_ke(series, cfg: WindowConfig | None = None) -> DetectionReport:
    """Modified z-scores of each window's ΔKE.

    No baseline is involved, so every window is scored.
    """
    cfg = (cfg or WindowConfig()).with_(representation="delta_ke")
    x = as_samples(series)
    starts = window_starts(x.size, cfg.window_len, cfg.stride)
    if starts.size < 3:
        raise InsufficientDataError(f"{starts.size} windows available; need at least 3")
    L, cells = cfg.window_len, cfg.delta_ke_cells
    statistic = np.array([
        kdee_profile(x[s:s + L], cfg.tau_max, cells, cells).delta_ke for s in starts
    ])
    return _report(starts, statistic, np.ones(starts.size, dtype=bool), cfg)


DETECTORS = {
    "kde": detect_sliding_baseline,
    "psd": detect_psd_baseline,
    "delta_ke": detect_delta_ke,
}
METHOD_REPRESENTATION = {"kl-kde": "kde", "kl-psd": "psd", "delta-ke": "delta_ke"}


def detect(series, cfg: WindowConfig | None = None) -> DetectionReport:
    """Run the detector selected by ``cfg.representation``."""
    cfg = cfg or WindowConfig()
    return DETECTORS[cfg.representation](series, cfg)
