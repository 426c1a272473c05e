"""Time-series and interval types plus CSV/JSON record I/O.

CSV layout is ``index,value[,label]`` with a header row. Rows whose label is
the background label (``"n"`` or empty) belong to no interval; every maximal
run of another label becomes one :class:`LabeledInterval`. Sample rate and
free-form metadata live in a JSON sidecar next to the CSV
(``<file>.meta.json``).

JSON layout is a single object::

    {"sample_rate_hz": 5000.0, "samples": [...],
     "intervals": [{"start": 0, "end": 10, "label": "injection"}],
     "meta": {"seed": 1, ...}}
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ParameterError, ParseError, ValidationError

logger = logging.getLogger(__name__)

BACKGROUND_LABEL = "n"
_BACKGROUND_ALIASES = {"", BACKGROUND_LABEL}


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real-valued series.

    ``samples`` is stored as a read-only float64 copy.
    """

    samples: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise ValidationError("time series must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValidationError(f"non-finite sample at index {bad}")
        rate = float(self.sample_rate_hz)
        if not (math.isfinite(rate) and rate > 0):
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", rate)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None

    @property
    def duration_s(self):
        return len(self) / self.sample_rate_hz

    def slice(self, start, stop):
        return TimeSeries(self.samples[start:stop], self.sample_rate_hz)

    def decimate(self, factor: int) -> "TimeSeries":
        """Keep every ``factor``-th sample (no anti-alias filter)."""
        if factor < 1:
            raise ParameterError(f"decimation factor must be >= 1, got {factor}")
        return TimeSeries(self.samples[::factor], self.sample_rate_hz / factor)


@dataclass(frozen=True, order=True)
class LabeledInterval:
    """Half-open sample interval ``[start, end)`` carrying a class label."""

    start: int
    end: int
    label: str = "injection"

    def __post_init__(self):
        start, end = int(self.start), int(self.end)
        if start < 0 or end <= start:
            raise ValidationError(f"invalid interval [{self.start}, {self.end})")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "label", str(self.label))

    def __len__(self):
        return self.end - self.start

    def overlap(self, start, end):
        """Number of samples shared with ``[start, end)``."""
        return max(0, min(self.end, end) - max(self.start, start))

    def to_dict(self):
        return {"start": self.start, "end": self.end, "label": self.label}


@dataclass(frozen=True, eq=False)
class LabeledRecord:
    """A series with (possibly empty) ground-truth intervals and metadata."""

    series: TimeSeries
    truth: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        truth = tuple(sorted(self.truth, key=lambda iv: (iv.start, iv.end, iv.label)))
        n = len(self.series)
        for iv in truth:
            if iv.end > n:
                raise ValidationError(
                    f"interval [{iv.start}, {iv.end}) exceeds series length {n}"
                )
        last_end = {}
        for iv in truth:
            if iv.start < last_end.get(iv.label, 0):
                raise ValidationError(f"overlapping intervals with label {iv.label!r}")
            last_end[iv.label] = iv.end
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "meta", dict(self.meta))

    def __eq__(self, other):
        if not isinstance(other, LabeledRecord):
            return NotImplemented
        return self.series == other.series and self.truth == other.truth

    __hash__ = None

    def labels(self) -> list[str]:
        """Per-sample label sequence (inverse of :func:`labels_to_intervals`)."""
        return intervals_to_labels(self.truth, len(self.series))


def labels_to_intervals(labels: Sequence[str], background=BACKGROUND_LABEL) -> list[LabeledInterval]:
    """Convert a per-sample label sequence into maximal labeled runs."""
    background_set = _BACKGROUND_ALIASES | {background}
    out = []
    run_label, run_start = None, 0
    for i, lab in enumerate(list(labels) + [None]):
        lab = None if lab is None or lab in background_set else str(lab)
        if lab != run_label:
            if run_label is not None:
                out.append(LabeledInterval(run_start, i, run_label))
            run_label, run_start = lab, i
    return out


def intervals_to_labels(intervals: Iterable[LabeledInterval], length: int,
                        background=BACKGROUND_LABEL) -> list[str]:
    labels = [background] * length
    for iv in intervals:
        if iv.end > length:
            raise ValidationError(f"interval [{iv.start}, {iv.end}) exceeds length {length}")
        for i in range(iv.start, iv.end):
            if labels[i] != background:
                raise ValidationError(
                    "overlapping intervals cannot be represented as per-row labels"
                )
            labels[i] = iv.label
    return labels


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary file in the target directory, then rename over ``path``.

    Nothing is left at ``path`` if the body raises.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _infer_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("csv", "json"):
            raise ParameterError(f"unknown record format {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix in (".csv", ".txt", ""):
        return "csv"
    raise ParameterError(f"cannot infer record format from {path!r}; pass format=")


def _parse_float(text, row):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse value {text!r}", row=row) from None
    if not math.isfinite(value):
        raise ValidationError(f"row {row}: non-finite value {text!r}")
    return value


def _read_csv(path, sample_rate_hz):
    with open(path, newline="") as fh:
        text = fh.read()
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if header[:2] != ["index", "value"] or len(header) > 3 or (
        len(header) == 3 and header[2] != "label"
    ):
        raise ParseError(f"expected header 'index,value[,label]', got {rows[0]}", row=1)
    has_label = len(header) == 3
    body = rows[1:]
    if not body:
        raise ValidationError(f"{path}: no data rows")
    values, labels = [], []
    for k, row in enumerate(body):
        rownum = k + 2
        if len(row) not in (2, 3) or (len(row) == 3 and not has_label):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", row=rownum)
        try:
            idx = int(row[0])
        except ValueError:
            raise ParseError(f"cannot parse index {row[0]!r}", row=rownum) from None
        if idx != k:
            raise ParseError(f"index {idx} out of sequence (expected {k})", row=rownum)
        values.append(_parse_float(row[1].strip(), rownum))
        labels.append(row[2].strip() if len(row) == 3 else BACKGROUND_LABEL)

    meta: dict[str, Any] = {}
    side = sidecar_path(path)
    rate = sample_rate_hz
    if side.exists():
        with open(side) as fh:
            info = json.load(fh)
        meta = dict(info.get("meta", {}))
        if rate is None:
            rate = info.get("sample_rate_hz")
    if rate is None:
        logger.warning("%s: no sample rate given and no sidecar; assuming 1 Hz", path)
        rate = 1.0
    series = TimeSeries(values, rate)
    return LabeledRecord(series, tuple(labels_to_intervals(labels)), meta)


def _read_json(path, sample_rate_hz):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", row=exc.lineno) from None
    if not isinstance(obj, dict) or "samples" not in obj:
        raise ValidationError(f"{path}: JSON record must be an object with 'samples'")
    samples = obj["samples"]
    if not samples:
        raise ValidationError(f"{path}: empty samples")
    values = [_parse_float(v, i + 1) if not isinstance(v, (int, float)) else float(v)
              for i, v in enumerate(samples)]
    rate = sample_rate_hz if sample_rate_hz is not None else obj.get("sample_rate_hz", 1.0)
    intervals = tuple(
        LabeledInterval(int(d["start"]), int(d["end"]), str(d.get("label", "injection")))
        for d in obj.get("intervals", [])
    )
    return LabeledRecord(TimeSeries(values, rate), intervals, obj.get("meta", {}))


def read_record(path, format: str | None = None, sample_rate_hz: float | None = None) -> LabeledRecord:
    """Load a :class:`LabeledRecord` from CSV or JSON.

    ``sample_rate_hz`` overrides whatever the file or its sidecar says.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file")
    if path.stat().st_size == 0:
        raise ValidationError(f"{path}: empty file")
    fmt = _infer_format(path, format)
    if fmt == "csv":
        return _read_csv(path, sample_rate_hz)
    return _read_json(path, sample_rate_hz)


def record_to_json(record: LabeledRecord) -> dict:
    return {
        "sample_rate_hz": record.series.sample_rate_hz,
        "samples": [float(v) for v in record.series.samples],
        "intervals": [iv.to_dict() for iv in record.truth],
        "meta": record.meta,
    }


def write_record(record: LabeledRecord, path, format: str | None = None) -> None:
    """Write ``record`` to ``path``; CSV output also writes the metadata sidecar."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "json":
        with atomic_write(path) as fh:
            json.dump(record_to_json(record), fh, default=_json_default)
        return

    samples = record.series.samples
    labels = intervals_to_labels(record.truth, len(samples)) if record.truth else None
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value", "label"] if labels else ["index", "value"])
        for i, v in enumerate(samples):
            w.writerow([i, _fmt(v), labels[i]] if labels else [i, _fmt(v)])
    with atomic_write(sidecar_path(path)) as fh:
        json.dump({"sample_rate_hz": record.series.sample_rate_hz, "meta": record.meta}, fh,
                  indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def as_samples(x) -> np.ndarray:
    """Return the float64 sample array of a TimeSeries or array-like."""
    if isinstance(x, TimeSeries):
        return x.samples
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise ValidationError("series must contain at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("series contains non-finite samples")
    return arr
