"""Optional numba acceleration.

Set ``MFMSBO_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time.
"""

import os

_DISABLED = os.environ.get("MFMSBO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _njit = None
    HAVE_NUMBA = False


def njit(f):
    """Compile ``f`` with numba when available, otherwise return it untouched."""
    if _njit is None:
        return f
    return _njit(cache=True, fastmath=False)(f)


def use_numba():
    return HAVE_NUMBA
