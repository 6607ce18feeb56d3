"""JIT switch for the numeric kernels.

Kernels are written once in the numba-compatible subset of Python/numpy.
When numba is importable and ``GENPTR_DISABLE_NUMBA`` is unset (or "0"),
they are compiled with ``numba.njit``; otherwise the same functions run as
plain numpy code.  Both paths must agree to floating-point tolerance; the
benchmark in ``benchmarks/`` compares them.
"""

import os
import warnings

__all__ = ["njit", "USING_NUMBA", "PerformanceWarning"]


class PerformanceWarning(UserWarning):
    pass


def _env_disabled():
    return os.environ.get("GENPTR_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")


USING_NUMBA = False

if not _env_disabled():
    try:
        import numba as _numba

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba is not available; kernels run as pure numpy", PerformanceWarning)


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if func is None:
        return lambda f: njit(f, **kwargs)
    if not USING_NUMBA:
        return func
    kwargs.setdefault("cache", True)
    return _numba.njit(**kwargs)(func)
