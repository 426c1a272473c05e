"""Deterministic, order-independent random streams.

Every random draw in the package goes through :func:`stream`, which derives an
independent PCG64 generator from a root seed plus an arbitrary key path, e.g.
``stream(seed, trial, "noise")``. Two different key paths never share state, so
trials can be generated in any order (or concurrently) with identical results.
"""

import zlib

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1


def _key_to_int(key):
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ParameterError(f"stream keys must be non-negative, got {key}")
        return int(key) & _MASK64
    return zlib.crc32(str(key).encode("utf-8"))


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed <= _MASK64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)


def stream(seed, *keys):
    """Return a ``numpy.random.Generator`` for ``(seed, *keys)``."""
    entropy = [check_seed(seed)] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """Derive a child 64-bit seed, for handing to functions that take a seed."""
    return int(stream(seed, *keys).integers(0, _MASK64, dtype=np.uint64, endpoint=True))
