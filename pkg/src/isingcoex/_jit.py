"""Backend switch for the hot kernels.

Every kernel exists twice: a loop version compiled with numba ``@njit`` and a
vectorised pure-numpy version.  ``ISINGCOEX_DISABLE_JIT=1`` makes the numpy
path the default everywhere.  Both paths read the same counter-based random
stream, so they produce identical samples.
"""

import os

_FLAG = os.environ.get("ISINGCOEX_DISABLE_JIT", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

NUMBA_AVAILABLE = _numba is not None
JIT_ENABLED = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if _numba is None:  # pragma: no cover
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def pick(numba_impl, numpy_impl):
    return numba_impl if JIT_ENABLED else numpy_impl


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "numpy"
