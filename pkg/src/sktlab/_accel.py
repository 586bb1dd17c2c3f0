"""Numba switch.

Set ``SKTLAB_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. The flag is read once at import time.
"""
import os

_FLAG = os.environ.get("SKTLAB_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None

USE_NUMBA = _nb is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if _nb is None:  # pragma: no cover
        return func
    return _nb.njit(cache=True)(func)
