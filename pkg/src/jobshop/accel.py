"""Backend selection for the hot kernels.

All kernels are written once as plain Python over numpy arrays.  By default
they are compiled with numba (nopython, nogil, on-disk cache).  Setting the
environment variable JOBSHOP_NUMBA=0 before import skips compilation and runs
the same source uncompiled, which is slow but has identical integer semantics.
The flag is read once at import time.
"""

import os

_flag = os.environ.get("JOBSHOP_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

using_numba = False
if _want_numba:
    try:
        from numba import njit as _njit
        using_numba = True
    except ImportError:
        using_numba = False


def kernel(func):
    """Decorator for hot functions: numba-compile when enabled, else no-op."""
    if using_numba:
        return _njit(cache=True, nogil=True)(func)
    return func


def backend_name() -> str:
    return "numba" if using_numba else "python"
