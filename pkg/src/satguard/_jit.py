"""Optional numba acceleration.

Set ``SATGUARD_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The kernels are written in the numba-compatible subset, so both paths
execute the same source.
"""

import os

_DISABLED = os.environ.get("SATGUARD_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _nb

    NUMBA_ENABLED = True
except ImportError:
    _nb = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if NUMBA_ENABLED:
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(f):
        return f

    return wrapper
