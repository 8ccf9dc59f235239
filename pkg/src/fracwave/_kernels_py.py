"""NumPy fallback for the triangular convolution kernels.

Same contract as the compiled module ``fracwave._kernels``: the weighted
history sums behind the fractional-integral quadrature,

    out[i] = first[i] * f[0] + sum_{k=1..i} conv[i-k] * f[k],

where ``conv`` holds the stationary product-integration weights and
``first`` the left-endpoint corrections.
"""

import numpy as np

BACKEND = "python"


def causal_conv(conv, first, f):
    """Apply the weights to a single sampled function, all nodes at once."""
    f = np.ascontiguousarray(f, dtype=np.float64)
    n = f.shape[0]
    shifted = f.copy()
    shifted[0] = 0.0
    out = np.convolve(shifted, conv)[:n]
    out += first * f[0]
    return out


def causal_conv_multi(conv, first, g):
    """Apply the weights along axis 0 of a (time, space) history matrix."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[0]
    out = np.empty_like(g)
    out[0] = 0.0
    for i in range(1, n):
        out[i] = first[i] * g[0] + conv[:i] @ g[i:0:-1]
    return out


def causal_conv_at(conv, first, g, i):
    """Evaluate the weighted history sum at time index ``i`` only."""
    if i == 0:
        return np.zeros_like(np.asarray(g[0], dtype=np.float64))
    return first[i] * g[0] + conv[:i] @ g[i:0:-1]
