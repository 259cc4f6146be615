import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carrollmkt import _kernels_py, kernels

from oracles import lmsr_cost

try:
    from carrollmkt import _kernels as _compiled
except ImportError:
    _compiled = None


q_arrays = st.lists(st.floats(-50, 50), min_size=1, max_size=60).map(
    lambda xs: np.asarray(xs, dtype=np.float64)
)
b_values = st.floats(0.5, 5.0)


@settings(max_examples=80, deadline=None)
@given(q_arrays, b_values)
def test_cost_matches_mpmath(q, b):
    assert kernels.cost(q, b) == pytest.approx(float(lmsr_cost(q, b)), abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(q_arrays, b_values, st.randoms(use_true_random=False))
def test_masked_sums_consistent(q, b, rnd):
    mask = np.array([rnd.random() < 0.5 for _ in q], dtype=bool)
    m, s_in, s_out = kernels.masked_sums(q, b, mask)
    w = np.exp(q / b - m)
    assert s_in == pytest.approx(float(w[mask].sum()), rel=1e-12)
    assert s_in + s_out == pytest.approx(float(w.sum()), rel=1e-12)


@pytest.mark.skipif(_compiled is None, reason="compiled kernels not built")
@settings(max_examples=60, deadline=None)
@given(q_arrays, b_values)
def test_backends_agree(q, b):
    assert _compiled.cost(q, b) == pytest.approx(_kernels_py.cost(q, b), abs=1e-12)
    mask = np.zeros(len(q), dtype=bool)
    mask[:: 2] = True
    mc = _compiled.masked_sums(q, b, mask.view(np.uint8))
    mp_ = _kernels_py.masked_sums(q, b, mask)
    assert mc[1] == pytest.approx(mp_[1], rel=1e-12)
    assert mc[2] == pytest.approx(mp_[2], rel=1e-12)


def test_extreme_magnitudes_stay_finite():
    q = np.array([1e4, -1e4, 0.0])
    for backend in filter(None, (_compiled, _kernels_py)):
        c = backend.cost(q, 1.0)
        assert np.isfinite(c) and c == pytest.approx(1e4, rel=1e-12)
        assert backend.softmax_sum(q, 1.0) == pytest.approx(1.0, abs=1e-9)


def test_apply_delta_touches_only_mask():
    q = np.zeros(6)
    mask = np.array([True, False, True, False, True, False])
    kernels.apply_delta(q, mask, 2.5)
    assert list(q) == [2.5, 0.0, 2.5, 0.0, 2.5, 0.0]


def test_pure_env_selects_python(monkeypatch):
    monkeypatch.setenv("CARROLLMKT_PURE", "1")
    import carrollmkt.kernels as k

    fresh = importlib.reload(k)
    try:
        assert fresh.BACKEND == "python"
    finally:
        monkeypatch.delenv("CARROLLMKT_PURE")
        importlib.reload(k)
