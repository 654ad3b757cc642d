"""Numba switch.

Set ``SWITCHCOST_DISABLE_NUMBA=1`` to run every hot kernel through its
pure-numpy fallback. The flag is read once, at import time.
"""
import os
import warnings

_DISABLED = os.environ.get("SWITCHCOST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None
    if not _DISABLED:
        warnings.warn("numba not importable; falling back to numpy kernels")

NUMBA_AVAILABLE = _nb is not None
USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Kernels are always compiled when numba exists (so the benchmark can
    compare both paths); ``USE_NUMBA`` only decides which path the library
    dispatches to.
    """
    if _nb is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def identity(fn):
            return fn
        return identity
    return _nb.njit(*args, **kwargs)
