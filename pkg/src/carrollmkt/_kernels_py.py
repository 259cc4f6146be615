"""NumPy implementations of the per-trade kernels.

These are the fallback used when the compiled extension is unavailable;
both backends must agree to within float rounding.  All functions use the
max-shift (log-sum-exp) form so that quantities remain finite for
|q|/b up to at least 1e4.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def cost(q: np.ndarray, b: float) -> float:
    """b * log(sum_w exp(q_w / b)), max-shifted."""
    z = q / b
    m = float(z.max())
    return b * (m + math.log(float(np.exp(z - m).sum())))


def masked_sums(q: np.ndarray, b: float, mask: np.ndarray):
    """(shift, sum_in, sum_out) of exp(q/b - shift) inside/outside mask."""
    z = q / b
    m = float(z.max())
    w = np.exp(z - m)
    s_in = float(w[mask].sum())
    return m, s_in, float(w.sum()) - s_in


def softmax_sum(q: np.ndarray, b: float) -> float:
    """Sum of all per-outcome prices; equals 1 up to rounding."""
    z = q / b
    w = np.exp(z - z.max())
    return float((w / w.sum()).sum())


def apply_delta(q: np.ndarray, mask: np.ndarray, delta: float) -> None:
    q[mask] += delta
