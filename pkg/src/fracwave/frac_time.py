"""Riemann-Liouville fractional integrals/derivatives on a uniform mesh.

Left- and right-sided integrals of order alpha in (0, 1) are computed by
product integration: the data is taken piecewise linear between nodes and
the weakly singular kernel is integrated exactly on each cell, so no
singular quadrature weights are needed.  Derivatives follow as fourth-order
finite differences of the complementary integral.  The module also carries
the polynomial cutoff (1 - t/T)^beta, whose right-sided fractional
derivative has a closed form used as a temporal test function, and the
memory convolution int_0^t (t-s)^(-gamma) |u(s)|^p ds.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import gamma as _gamma

from .kernels import causal_conv, causal_conv_at, pi_kernel, pi_scale

__all__ = [
    "TimeMesh",
    "SampledFn",
    "FracOrder",
    "CutoffParams",
    "MemoryWeights",
    "rl_integral",
    "rl_derivative",
    "cutoff",
    "cutoff_constant",
    "cutoff_constant_alt",
    "closed_cutoff_derivative",
    "cutoff_derivative_bound",
    "check_cutoff_derivative_bound",
    "verify_inversion",
    "verify_parts",
    "memory_convolve",
]


@dataclass(frozen=True)
class TimeMesh:
    """Uniform mesh on [0, T] with ``num_points`` nodes (node 0 at t=0)."""

    t_end: float
    num_points: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.num_points < 2:
            raise ValueError(f"need at least 2 nodes, got {self.num_points}")

    @property
    def dt(self):
        return self.t_end / (self.num_points - 1)

    @cached_property
    def nodes(self):
        t = np.linspace(0.0, self.t_end, self.num_points)
        t.flags.writeable = False
        return t


@dataclass
class SampledFn:
    """Real samples of a function on a :class:`TimeMesh`."""

    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.num_points,):
            raise ValueError(
                f"expected {self.mesh.num_points} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("samples must be finite")

    @classmethod
    def from_callable(cls, mesh, fn):
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=np.float64))


@dataclass(frozen=True)
class FracOrder:
    """Fractional order restricted to (0, 1)."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"order must lie in (0, 1), got {self.alpha}")


def _as_alpha(alpha):
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    if not 0.0 < a < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {a}")
    return a


@dataclass(frozen=True)
class CutoffParams:
    """Cutoff exponent and horizon for the temporal test function.

    ``beta > alpha + 2`` keeps the fractional derivative of the cutoff C^2
    with value and slope vanishing at T, which the weak-form machinery
    requires.
    """

    T: float
    beta: float
    alpha: FracOrder

    def __post_init__(self):
        if isinstance(self.alpha, float):
            object.__setattr__(self, "alpha", FracOrder(self.alpha))
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not self.beta > self.alpha.alpha + 2.0:
            raise ValueError(
                f"beta must exceed alpha + 2 (got beta={self.beta}, alpha={self.alpha.alpha})"
            )


# ---------------------------------------------------------------------------
# cached product-integration weights


@lru_cache(maxsize=128)
def _cached_kernel(num_points, dt, alpha):
    conv, first = pi_kernel(alpha, num_points)
    return conv, first, pi_scale(alpha, dt)


class MemoryWeights:
    """Weight table for one (mesh, alpha) pair, shared across evaluations.

    Holds the Toeplitz body and boundary column of the product-integration
    rule.  Immutable after construction; safe to share across threads.
    """

    def __init__(self, mesh, alpha):
        self.mesh = mesh
        self.alpha = _as_alpha(alpha)
        self.conv, self.first, self.scale = _cached_kernel(
            mesh.num_points, mesh.dt, self.alpha
        )

    def integral_all(self, values):
        """Order-alpha left integral of ``values`` at every node."""
        values = np.ascontiguousarray(values, dtype=np.float64)
        return self.scale * causal_conv(self.conv, self.first, values)

    def integral_at(self, history, i):
        """Order-alpha left integral at node ``i`` of a (time, space) history."""
        return self.scale * causal_conv_at(self.conv, self.first, history, i)


def rl_integral(f, alpha, side="left"):
    """Left or right fractional integral of ``f`` at every mesh node."""
    a = _as_alpha(alpha)
    w = MemoryWeights(f.mesh, a)
    if side == "left":
        out = w.integral_all(f.values)
    elif side == "right":
        out = w.integral_all(f.values[::-1])[::-1]
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return SampledFn(f.mesh, out)


def _differentiate4(values, dt):
    """Fourth-order first derivative on a uniform mesh (one-sided at ends)."""
    n = values.shape[0]
    if n < 5:
        raise ValueError("need at least 5 nodes for the differencing stencil")
    g = values
    d = np.empty_like(g)
    d[2:-2] = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / (12.0 * dt)
    d[0] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12.0 * dt)
    d[1] = (-3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / (12.0 * dt)
    d[-2] = (3 * g[-1] + 10 * g[-2] - 18 * g[-3] + 6 * g[-4] - g[-5]) / (12.0 * dt)
    d[-1] = (25 * g[-1] - 48 * g[-2] + 36 * g[-3] - 16 * g[-4] + 3 * g[-5]) / (12.0 * dt)
    return d


def rl_derivative(f, alpha, side="left"):
    """Fractional derivative: +/- d/dt of the complementary integral.

    Values at t=0 (left) resp. t=T (right) sit on the kernel singularity
    when f does not vanish there; callers should treat the first/last node
    as qualitative only.
    """
    a = _as_alpha(alpha)
    comp = rl_integral(f, 1.0 - a, side)
    d = _differentiate4(comp.values, f.mesh.dt)
    if side == "right":
        d = -d
    return SampledFn(f.mesh, d)


# ---------------------------------------------------------------------------
# cutoff family


def cutoff(t, T, beta):
    """(1 - t/T)^beta on [0, T], zero beyond T.  Total on the reals."""
    if not T > 0:
        raise ValueError("T must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    t = np.asarray(t, dtype=np.float64)
    w = np.where(t <= T, np.clip(1.0 - t / T, 0.0, None) ** beta, 0.0)
    return w if w.ndim else float(w)


def cutoff_constant(alpha, beta):
    """Constant in the closed right derivative of the cutoff power.

    Gamma(beta+1) / Gamma(beta+1-alpha); validated against the quadrature
    path (see :func:`rl_derivative`) by the frac-time verification suite.
    """
    a = _as_alpha(alpha)
    return _gamma(beta + 1.0) / _gamma(beta + 1.0 - a)


def cutoff_constant_alt(alpha, beta):
    """Alternative constant Gamma(beta+1) / ((beta+2-alpha) Gamma(beta-alpha)).

    Differs from :func:`cutoff_constant` by (beta-alpha)/(beta+2-alpha) and
    fails the quadrature cross-check by exactly that factor; kept so the
    verification suite can certify the constant choice.
    """
    a = _as_alpha(alpha)
    return _gamma(beta + 1.0) / ((beta + 2.0 - a) * _gamma(beta - a))


def closed_cutoff_derivative(p, t):
    """Right fractional derivative of the cutoff power, in closed form.

    Equals C * T^(-alpha) * (1 - t/T)^(beta - alpha) with
    C = :func:`cutoff_constant`.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > p.T):
        raise ValueError("t must lie in [0, T]")
    a = p.alpha.alpha
    c = cutoff_constant(a, p.beta)
    out = c * p.T ** (-a) * (1.0 - t_arr / p.T) ** (p.beta - a)
    return out if out.ndim else float(out)


def cutoff_derivative_bound(p, j, t):
    """Sharp envelope of the j-th time derivative of the closed cutoff derivative.

    For j in {0,1,2} and beta > alpha + j the magnitude equals
    C * (beta-alpha)_j * T^(-alpha-j) * (1 - t/T)^(beta-alpha-j), where
    (x)_j is the falling factorial.  j = 0 reduces to
    |:func:`closed_cutoff_derivative`| itself.
    """
    if j not in (0, 1, 2):
        raise ValueError(f"j must be 0, 1 or 2, got {j}")
    a = p.alpha.alpha
    if not p.beta > a + j:
        raise ValueError(f"need beta > alpha + j (beta={p.beta}, alpha={a}, j={j})")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > p.T):
        raise ValueError("t must lie in [0, T]")
    falling = _gamma(p.beta - a + 1.0) / _gamma(p.beta - a - j + 1.0)
    c = cutoff_constant(a, p.beta) * falling
    out = c * p.T ** (-a - j) * (1.0 - t_arr / p.T) ** (p.beta - a - j)
    return out if out.ndim else float(out)


def check_cutoff_derivative_bound(p, j, num_points=2001):
    """Numerically differentiate the closed cutoff derivative j times and
    return the max ratio |numeric| / bound over interior nodes."""
    mesh = TimeMesh(p.T, num_points)
    psi = closed_cutoff_derivative(p, mesh.nodes)
    for _ in range(j):
        psi = _differentiate4(psi, mesh.dt)
    bound = cutoff_derivative_bound(p, j, mesh.nodes)
    sl = slice(2, -2)
    return float(np.max(np.abs(psi[sl]) / np.maximum(bound[sl], 1e-300)))


# ---------------------------------------------------------------------------
# identities


def verify_inversion(f, alpha, interior_lower_frac=0.05, subtract_initial=True):
    """Sup-norm residual of D^alpha J^alpha f = f over interior nodes.

    Nodes with t < interior_lower_frac * T are excluded: the derivative
    step sits on the kernel singularity at t=0 and its error does not
    share the quadrature's convergence order there.

    By default the initial value f(0) is peeled off before the round trip
    and restored exactly afterwards (the identity is exact on constants).
    The intermediate integral of the constant part has a t^alpha cusp that
    piecewise-linear resampling resolves only at order 1+alpha; peeling
    keeps the composed check at the quadrature's own order.  Pass
    ``subtract_initial=False`` for the raw composition.
    """
    a = _as_alpha(alpha)
    f0 = f.values[0] if subtract_initial else 0.0
    integ = rl_integral(SampledFn(f.mesh, f.values - f0), a, "left")
    back = rl_derivative(integ, a, "left").values + f0
    t = f.mesh.nodes
    keep = t >= interior_lower_frac * f.mesh.t_end
    keep[:2] = False
    return float(np.max(np.abs(back[keep] - f.values[keep])))


def verify_parts(phi, psi, alpha):
    """Both sides of the fractional integration-by-parts identity.

    lhs = int phi * (J^alpha_left psi), rhs = int psi * (J^alpha_right phi),
    by composite trapezoid over the shared mesh.
    """
    if phi.mesh != psi.mesh:
        raise ValueError("phi and psi must share a mesh")
    a = _as_alpha(alpha)
    left = rl_integral(psi, a, "left").values
    right = rl_integral(phi, a, "right").values
    dt = phi.mesh.dt
    lhs = float(np.trapezoid(phi.values * left, dx=dt))
    rhs = float(np.trapezoid(psi.values * right, dx=dt))
    return lhs, rhs


def memory_convolve(history, gamma, p):
    """Memory term F(t) = int_0^t (t-s)^(-gamma) |u(s)|^p ds on the mesh.

    Equal to Gamma(1-gamma) times the left integral of order 1-gamma of
    |u|^p; reuses the cached product-integration weights (the solver's hot
    path).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    a = 1.0 - gamma
    w = MemoryWeights(history.mesh, a)
    g = np.abs(history.values) ** p
    return SampledFn(history.mesh, _gamma(a) * w.integral_all(g))
