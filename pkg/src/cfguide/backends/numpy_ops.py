"""Pure-numpy reference implementation of the attention kernel."""

import numpy as np


def causal_attention(q, k, v, bias, scale):
    """Causal multi-head attention with an additive per-key-position bias.

    q, k, v: (heads, n, head_dim) float64 arrays.
    bias: (n,) additive term applied to the pre-softmax score of every key
    position, in every head.

    Returns (out, probs) where out is (heads, n, head_dim) and probs is the
    (heads, n, n) attention matrix (zero above the diagonal).
    """
    n = q.shape[1]
    scores = np.einsum("hid,hjd->hij", q, k) * scale
    scores = scores + bias[None, None, :]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    scores = np.where(upper[None, :, :], -np.inf, scores)
    scores -= scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    probs = weights / weights.sum(axis=-1, keepdims=True)
    out = np.einsum("hij,hjd->hid", probs, v)
    return out, probs
