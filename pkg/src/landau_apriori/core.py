"""Backend selection for the hot kernels.

The compiled extension is used when importable; set
``LANDAU_APRIORI_BACKEND=python`` to force the NumPy fallback.
"""

import logging
import os

from . import _core_py

log = logging.getLogger(__name__)

_forced = os.environ.get("LANDAU_APRIORI_BACKEND", "").lower()

if _forced == "python":
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        if _forced == "compiled":
            raise
        log.debug("compiled core unavailable, using NumPy fallback")
        _impl = _core_py
        BACKEND = "python"

_threads = 1


def set_threads(n: int) -> None:
    """Cap the worker pool used by the compiled convolution."""
    global _threads
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def convolve(tables, f, d, n):
    return _impl.convolve(tables, f, d, n, _threads)


def apply_operator(f, abar, cbar, d, n, h):
    return _impl.apply_operator(f, abar, cbar, d, n, h)
