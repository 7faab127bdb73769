import numpy as np
import pytest

from cfguide.backends import BACKEND_NAME, available_backends, numpy_ops


def test_backend_name_is_available():
    assert BACKEND_NAME in available_backends()


def _cython_or_skip():
    try:
        from cfguide.backends import _fastops
        return _fastops
    except ImportError:
        pytest.skip("compiled backend not built")


def test_backends_agree(rng):
    fast = _cython_or_skip()
    for _ in range(20):
        heads, n, d = 2, int(rng.integers(1, 12)), 4
        q = rng.standard_normal((heads, n, d))
        k = rng.standard_normal((heads, n, d))
        v = rng.standard_normal((heads, n, d))
        bias = rng.standard_normal(n)
        out_a, p_a = numpy_ops.causal_attention(q, k, v, bias, 0.5)
        out_b, p_b = fast.causal_attention(q, k, v, bias, 0.5)
        np.testing.assert_allclose(out_a, out_b, atol=1e-12)
        np.testing.assert_allclose(p_a, p_b, atol=1e-12)


def test_causal_masking(rng):
    # row i must put zero attention on positions > i
    q = rng.standard_normal((1, 5, 3))
    k = rng.standard_normal((1, 5, 3))
    v = rng.standard_normal((1, 5, 3))
    _, probs = numpy_ops.causal_attention(q, k, v, np.zeros(5), 1.0)
    for i in range(5):
        assert probs[0, i, i + 1:].sum() == 0.0
        assert probs[0, i, : i + 1].sum() == pytest.approx(1.0, abs=1e-12)


def test_bias_shifts_attention(rng):
    q = rng.standard_normal((1, 4, 3))
    k = rng.standard_normal((1, 4, 3))
    v = rng.standard_normal((1, 4, 3))
    bias = np.array([10.0, 0.0, 0.0, 0.0])
    _, probs = numpy_ops.causal_attention(q, k, v, bias, 1.0)
    assert probs[0, 3, 0] > 0.9
