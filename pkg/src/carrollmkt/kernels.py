"""Kernel backend selection.

The compiled extension is preferred when importable; set CARROLLMKT_PURE=1
to force the NumPy fallback (used by the benchmark and by tests that
cross-check the two backends).  Masks are passed to the compiled kernels
as uint8 views, which numpy bool arrays already are.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("CARROLLMKT_PURE"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND


def _as_u8(mask: np.ndarray) -> np.ndarray:
    return mask.view(np.uint8)


def cost(q: np.ndarray, b: float) -> float:
    return _impl.cost(q, b)


def masked_sums(q: np.ndarray, b: float, mask: np.ndarray):
    if _impl.BACKEND == "cython":
        return _impl.masked_sums(q, b, _as_u8(mask))
    return _impl.masked_sums(q, b, mask)


def softmax_sum(q: np.ndarray, b: float) -> float:
    return _impl.softmax_sum(q, b)


def apply_delta(q: np.ndarray, mask: np.ndarray, delta: float) -> None:
    if _impl.BACKEND == "cython":
        _impl.apply_delta(q, _as_u8(mask), delta)
    else:
        _impl.apply_delta(q, mask, delta)
