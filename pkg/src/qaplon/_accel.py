"""Backend selection for the hot loops.

Kernels are written once as plain Python loops and compiled with numba when it
is available. Setting ``QAPLON_NO_NUMBA=1`` forces the pure Python/numpy path,
which is also what runs when numba cannot be imported.
"""

import os

_flag = os.environ.get("QAPLON_NO_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled


def jit(func):
    """Compile ``func`` in nopython mode; the plain function when numba is off."""
    if not USE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
