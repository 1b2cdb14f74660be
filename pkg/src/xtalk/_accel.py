"""Backend selection for the hot kernels.

Set ``XTALK_NUMBA=0`` before import to force the pure-numpy path. When numba
is not installed the numpy path is used silently.
"""

import os

_flag = os.environ.get("XTALK_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

NUMBA_ENABLED = _numba is not None

JIT_OPTIONS = {"nogil": True, "cache": True}


def njit(func):
    """``numba.njit`` when enabled, identity otherwise."""
    if _numba is None:
        return func
    return _numba.njit(**JIT_OPTIONS)(func)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
