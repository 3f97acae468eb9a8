"""Numba acceleration switch.

Hot kernels in this package come in two flavours: a loop-style version
compiled with numba's @njit and a vectorized pure-numpy version.  Which
one backs the public API is decided once, at import time, from the
TLSRF_NUMBA environment variable:

    TLSRF_NUMBA=1      force numba (ImportError if numba is missing)
    TLSRF_NUMBA=0      force the pure-numpy fallback
    TLSRF_NUMBA=auto   use numba when importable (default)

Both variants of every kernel stay importable regardless of the flag so
tests and benchmarks can compare them.
"""

from __future__ import annotations

import os

_flag = os.environ.get("TLSRF_NUMBA", "auto").strip().lower()

HAVE_NUMBA = False
try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    pass

if _flag in ("1", "true", "on", "yes"):
    if not HAVE_NUMBA:
        raise ImportError("TLSRF_NUMBA=1 but numba is not importable")
    USE_NUMBA = True
elif _flag in ("0", "false", "off", "no"):
    USE_NUMBA = False
elif _flag == "auto":
    USE_NUMBA = HAVE_NUMBA
else:
    raise ValueError(f"unrecognized TLSRF_NUMBA value: {_flag!r}")


def njit(**kwargs):
    """Return numba.njit(**kwargs) when numba is available, else a no-op.

    Kernels decorated with this are plain (slow) Python functions when
    numba is absent; modules still expose a separate vectorized numpy
    implementation for the fallback path selected by USE_NUMBA.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(**kwargs)

    def deco(fn):
        return fn

    return deco


# Bare alias so kernels can write `for i in prange(n)`: numba resolves
# it to its parallel range, the fallback interpreter to plain range.
prange = numba.prange if HAVE_NUMBA else range
