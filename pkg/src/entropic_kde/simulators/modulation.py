"""Pulse-shaped digital modulations on a real passband carrier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ParameterError
from ..rng import stream
from ..timeseries import TimeSeries


@dataclass(frozen=True)
class RfSimConfig:
    """Signal geometry for the RF experiments.

    Defaults give 5000 samples carrying 100 symbols, 50 samples per symbol and
    one carrier cycle per symbol (100 Hz carrier at 5000 Hz).
    """

    fs_hz: float = 5000.0
    symbols: int = 100
    samples_per_symbol: int = 50
    carrier_hz: float = 100.0
    rolloff: float = 0.25
    span_symbols: int = 8
    snr_db: float = 10.0
    sir_db: float = 10.0
    # interference layout, see channel.subchannel_centers
    interference_lo_hz: float = 80.0
    interference_hi_hz: float = 120.0
    bands: int = 4
    subchannels_per_band: int = 5
    band_width_hz: float = 6.25
    subchannel_symbol_rate_hz: float = 1.0

    def __post_init__(self):
        if self.fs_hz <= 0 or self.symbols < 1 or self.samples_per_symbol < 2:
            raise ParameterError("fs_hz, symbols and samples_per_symbol must be positive")
        if not 0 < self.rolloff <= 1:
            raise ParameterError(f"rolloff must be in (0, 1], got {self.rolloff}")
        symbol_rate = self.fs_hz / self.samples_per_symbol
        if not math.isclose(self.carrier_hz, symbol_rate, rel_tol=1e-9):
            raise ParameterError(
                f"carrier ({self.carrier_hz} Hz) must equal the symbol rate ({symbol_rate} Hz)"
            )
        if self.bands < 1 or self.subchannels_per_band < 1 or self.band_width_hz <= 0:
            raise ParameterError("interference layout must be non-empty")

    @property
    def length(self):
        return self.symbols * self.samples_per_symbol

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModulationFormat:
    name: str
    constellation: tuple

    @property
    def points(self):
        return np.asarray(self.constellation, dtype=np.complex128)


def _unit_power(points):
    points = np.asarray(points, dtype=np.complex128)
    return tuple(points / math.sqrt(np.mean(np.abs(points) ** 2)))


def _psk(m, offset=0.0):
    return _unit_power(np.exp(1j * (2 * np.pi * np.arange(m) / m + offset)))


def _pam(m):
    return _unit_power(2 * np.arange(m) - m + 1)


def _square_qam(m):
    k = int(round(math.sqrt(m)))
    levels = 2 * np.arange(k) - k + 1
    return _unit_power([complex(i, q) for i in levels for q in levels])


def _cross_qam32():
    levels = np.arange(-5, 6, 2)
    pts = [complex(i, q) for i in levels for q in levels if not (abs(i) == 5 and abs(q) == 5)]
    return _unit_power(pts)


def _apsk(ring_sizes, ring_radii, ring_phases):
    pts = []
    for size, radius, phase in zip(ring_sizes, ring_radii, ring_phases):
        pts.extend(radius * np.exp(1j * (phase + 2 * np.pi * np.arange(size) / size)))
    return _unit_power(pts)


# 16APSK 4+12 (ring ratio 2.6); 32APSK 4+12+16 (ratios 2.53, 4.3).
FORMATS = {
    f.name: f
    for f in (
        ModulationFormat("BPSK", _psk(2)),
        ModulationFormat("QPSK", _psk(4, np.pi / 4)),
        ModulationFormat("OQPSK", _psk(4, np.pi / 4)),
        ModulationFormat("Pi4QPSK", _psk(4, np.pi / 4)),
        ModulationFormat("8PSK", _psk(8)),
        ModulationFormat("16PSK", _psk(16)),
        ModulationFormat("OOK", _unit_power([0.0, 1.0])),
        ModulationFormat("4ASK", _pam(4)),
        ModulationFormat("8ASK", _pam(8)),
        ModulationFormat("16QAM", _square_qam(16)),
        ModulationFormat("64QAM", _square_qam(64)),
        ModulationFormat("32QAM", _cross_qam32()),
        ModulationFormat("16APSK", _apsk((4, 12), (1.0, 2.6), (np.pi / 4, np.pi / 12))),
        ModulationFormat("32APSK", _apsk((4, 12, 16), (1.0, 2.53, 4.3),
                                         (np.pi / 4, np.pi / 12, 0.0))),
    )
}
FORMAT_NAMES = tuple(FORMATS)


def get_format(name) -> ModulationFormat:
    if isinstance(name, ModulationFormat):
        return name
    for key, fmt in FORMATS.items():
        if key.lower() == str(name).lower():
            return fmt
    raise ParameterError(f"unknown modulation format {name!r}; choose from {', '.join(FORMATS)}")


def raised_cosine(t, rolloff):
    """Raised-cosine impulse response at ``t`` measured in symbol periods."""
    t = np.asarray(t, dtype=np.float64)
    denom = 1.0 - (2.0 * rolloff * t) ** 2
    singular = np.abs(denom) < 1e-10
    safe = np.where(singular, 1.0, denom)
    h = np.sinc(t) * np.cos(np.pi * rolloff * t) / safe
    return np.where(singular, np.pi / 4 * np.sinc(1.0 / (2.0 * rolloff)), h)


def raised_cosine_taps(rolloff, samples_per_symbol, span_symbols):
    """FIR taps spanning ``span_symbols`` symbols, scaled to unit energy."""
    half = span_symbols * samples_per_symbol // 2
    taps = raised_cosine(np.arange(-half, half + 1) / samples_per_symbol, rolloff)
    return taps / math.sqrt(np.sum(taps ** 2))


def baseband(format, cfg: RfSimConfig, seed: int, symbol_indices=None) -> np.ndarray:
    """Complex pulse-shaped baseband of ``cfg.symbols`` random symbols."""
    fmt = get_format(format)
    const = fmt.points
    if symbol_indices is None:
        symbol_indices = stream(seed, "symbols").integers(0, const.size, cfg.symbols)
    symbol_indices = np.asarray(symbol_indices)
    if symbol_indices.shape != (cfg.symbols,):
        raise ParameterError(f"expected {cfg.symbols} symbol indices")
    sym = const[symbol_indices]
    if fmt.name == "Pi4QPSK":
        sym = sym * np.exp(1j * np.pi / 4 * (np.arange(cfg.symbols) % 2))

    sps = cfg.samples_per_symbol
    n = cfg.length
    impulses = np.zeros(n, dtype=np.complex128)
    impulses[::sps] = sym
    taps = raised_cosine_taps(cfg.rolloff, sps, cfg.span_symbols)
    delay = taps.size // 2
    bb = np.convolve(impulses, taps)[delay:delay + n]
    if fmt.name == "OQPSK":
        shift = sps // 2
        q = np.zeros(n)
        q[shift:] = bb.imag[:-shift]
        bb = bb.real + 1j * q
    return bb


def modulate(format, cfg: RfSimConfig | None = None, seed: int = 0,
             symbol_indices=None) -> TimeSeries:
    """Random-symbol modulated passband signal with unit RMS.

    Symbols are drawn uniformly from the format's constellation, upsampled,
    raised-cosine filtered, mixed onto the carrier as
    ``Re{baseband * exp(2j pi f_c t)}`` and rescaled to RMS 1.

    ``symbol_indices`` forces a specific symbol sequence (indices into the
    constellation).
    """
    cfg = cfg or RfSimConfig()
    bb = baseband(format, cfg, seed, symbol_indices)
    t = np.arange(cfg.length) / cfg.fs_hz
    x = np.real(bb * np.exp(2j * np.pi * cfg.carrier_hz * t))
    rms = math.sqrt(np.mean(x ** 2))
    if rms == 0:
        raise ParameterError("modulated signal has zero power")
    return TimeSeries(x / rms, cfg.fs_hz)
