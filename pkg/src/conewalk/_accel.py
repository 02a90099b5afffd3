"""Backend selection for the hot loops.

Set ``CONEWALK_NO_NUMBA=1`` to force the pure-numpy path (also used when
numba is not importable).
"""
import os

_disabled = os.environ.get("CONEWALK_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
