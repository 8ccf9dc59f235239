"""Backend dispatch and weight construction for the fractional quadrature.

The weakly singular kernel (t-s)^(alpha-1) is integrated exactly against a
piecewise-linear interpolant of the data, which turns the fractional
integral into a lower-triangular Toeplitz apply plus a left-endpoint
correction.  Weight construction is cheap (O(N)); the O(N^2) applies live
in a compiled extension with a NumPy fallback, selected at import.  Set
``FRACWAVE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np
from scipy.special import gamma as _gamma

from . import _kernels_py

if os.environ.get("FRACWAVE_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

causal_conv = _impl.causal_conv
causal_conv_multi = _impl.causal_conv_multi
causal_conv_at = _impl.causal_conv_at


def available_backends():
    """Return the importable kernel backends, compiled first if present."""
    backends = []
    try:
        from . import _kernels

        backends.append(_kernels)
    except ImportError:
        pass
    backends.append(_kernels_py)
    return backends


def pi_kernel(alpha, num_points):
    """Product-integration weights for the order-``alpha`` integral.

    Returns ``(conv, first, scale)``.  For samples f on a uniform mesh with
    spacing dt, the integral at node i is

        scale * (first[i] * f[0] + sum_{k=1..i} conv[i-k] * f[k]),

    with ``scale = dt**alpha / Gamma(alpha + 2)`` applied by the caller.
    Exact for piecewise-linear data; all weights are nonnegative.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    n = int(num_points)
    if n < 2:
        raise ValueError("need at least 2 mesh points")
    j = np.arange(n, dtype=np.float64)
    ap1 = alpha + 1.0
    conv = np.empty(n)
    conv[0] = 1.0
    jj = j[1:]
    conv[1:] = (jj + 1.0) ** ap1 + (jj - 1.0) ** ap1 - 2.0 * jj**ap1
    first = np.empty(n)
    first[0] = 0.0
    first[1:] = (jj - 1.0) ** ap1 - jj**alpha * (jj - alpha - 1.0)
    conv.flags.writeable = False
    first.flags.writeable = False
    return conv, first


def pi_scale(alpha, dt):
    """Scale factor completing :func:`pi_kernel` weights."""
    return dt**alpha / _gamma(alpha + 2.0)
