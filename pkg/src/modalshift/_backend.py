"""Kernel backend selection: numba JIT by default, plain NumPy on request.

The hot numeric loops in ``_kernels`` are written once in nopython-compatible
style and compiled with ``@njit`` when numba is importable. Setting
``MODALSHIFT_NUMBA=0`` (before the package is imported) runs the very same
functions uncompiled, which is slow but produces bit-identical results.
``benchmarks/bench_kernels.py`` measures the gap between the two paths.
"""

from __future__ import annotations

import os

_FALSEY = {"0", "false", "no", "off"}


def numba_requested() -> bool:
    return os.environ.get("MODALSHIFT_NUMBA", "1").strip().lower() not in _FALSEY


def _resolve() -> bool:
    if not numba_requested():
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve()

if NUMBA_ENABLED:
    from numba import njit as _njit

    def compile_kernel(func):
        return _njit(cache=True)(func)

else:

    def compile_kernel(func):
        return func
