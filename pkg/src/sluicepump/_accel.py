"""Numba switch.

Set ``SLUICEPUMP_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
"""

import os

_FLAG = os.environ.get("SLUICEPUMP_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` with numba when available; return it unchanged otherwise."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)
