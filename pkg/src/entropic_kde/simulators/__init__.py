"""Seeded signal generators for the RF, synthetic and Lorenz experiments."""

from .channel import (
    INJECTION_LABEL,
    InjectionComponents,
    awgn_sigma,
    gaussian_noise,
    injection_components,
    interference_background,
    make_injection_record,
    noisy_signal,
    place_injection,
    power,
    subchannel_centers,
)
from .lorenz import LorenzConfig, integrate, lorenz_rhs, lorenz_trajectory, lorenz_x, rk4_step
from .modulation import (
    FORMAT_NAMES,
    FORMATS,
    ModulationFormat,
    RfSimConfig,
    get_format,
    modulate,
    raised_cosine,
    raised_cosine_taps,
)
from .synthetic import abs_sine_insert, sine_record, structural_change_record

__all__ = [
    "FORMATS", "FORMAT_NAMES", "INJECTION_LABEL", "InjectionComponents", "LorenzConfig",
    "ModulationFormat", "RfSimConfig", "abs_sine_insert", "awgn_sigma", "gaussian_noise",
    "get_format", "injection_components", "integrate", "interference_background",
    "lorenz_rhs", "lorenz_trajectory", "lorenz_x", "rk4_step", "make_injection_record", "modulate", "noisy_signal",
    "place_injection", "power", "raised_cosine", "raised_cosine_taps", "sine_record",
    "structural_change_record", "subchannel_centers",
]
