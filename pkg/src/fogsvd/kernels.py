"""Hot-loop kernels, compiled when available.

The Cython extension ``fogsvd._speedups`` is used if it was built and
``FOGSVD_PURE_PYTHON`` is not set; otherwise the reference implementations
in ``fogsvd._pykernels`` run.  Integer kernels fall back to Python for any
input that does not fit a signed 62-bit word.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("FOGSVD_PURE_PYTHON"):
        raise ImportError("pure Python forced")
    from . import _speedups
except ImportError:
    _speedups = None

_INT_LIMIT = 1 << 62

BACKENDS = {"python": _pykernels}
if _speedups is not None:
    BACKENDS["cython"] = _speedups
_active = _speedups or _pykernels


def backend() -> str:
    return _active.NAME


def set_backend(name: str) -> str:
    """Switch the active backend (used by the benchmark and tests)."""
    global _active
    previous = _active.NAME
    _active = BACKENDS[name]
    return previous


def _small(values) -> bool:
    return all(0 < v < _INT_LIMIT for v in values)


def jacobi_sweeps(a: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> int:
    return _active.jacobi_sweeps(a, v, tol, max_sweeps)


def scan_moduli(lc, start: int, stop: int) -> tuple[int, int, int]:
    if _active is not _pykernels and _small(lc) and stop < _INT_LIMIT:
        return _active.scan_moduli(np.asarray(lc, dtype=np.int64), start, stop)
    return _pykernels.scan_moduli(lc, start, stop)


def scan_differences(lc, t: int) -> tuple[int, int]:
    if not lc or min(lc) <= 0:
        return 0, 0
    if _active is not _pykernels and _small(lc) and t < _INT_LIMIT:
        return _active.scan_differences(np.asarray(lc, dtype=np.int64), t)
    return _pykernels.scan_differences(lc, t)
