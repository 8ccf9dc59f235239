"""Critical-exponent formulas, scaling functions and regime classification.

Everything here is closed-form arithmetic in the parameter quadruple
(n, gamma, theta) plus an optional data-regularity index s.  Denominators
that hit their positive part map to +inf (a meaningful regime: every
p > 1 lies on the nonexistence side), never to an exception.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExponentInputs",
    "ExponentReport",
    "Classification",
    "p_c",
    "p_tilde_c",
    "p_bar",
    "g_eta",
    "h_eta",
    "h_argmax",
    "h_grid_argmax",
    "classify",
    "region_atlas",
    "atlas_to_csv",
    "atlas_to_json",
    "p_fujita",
    "p_strauss",
]

CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class ExponentInputs:
    """Parameter point: dimension, memory exponent, damping order, regularity."""

    n: int
    gamma: float
    theta: float
    s: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 <= self.theta < 0.5:
            raise ValueError(f"theta must lie in [0, 1/2), got {self.theta}")
        if self.s is not None and self.s < 0:
            raise ValueError(f"regularity s must be >= 0, got {self.s}")


@dataclass(frozen=True)
class ExponentReport:
    """All exponent values at one parameter point, with the binding branch."""

    inputs: ExponentInputs
    p_c: float
    inv_gamma: float
    p_tilde_c: float | None
    p_bar: float
    binding: str

    def regime(self, p):
        return classify(self.inputs, p).regime

    def to_dict(self):
        d = {
            "n": self.inputs.n,
            "gamma": self.inputs.gamma,
            "theta": self.inputs.theta,
            "p_c": _jsonable(self.p_c),
            "inv_gamma": self.inv_gamma,
            "p_bar": _jsonable(self.p_bar),
            "binding": self.binding,
        }
        if self.inputs.s is not None:
            d["s"] = self.inputs.s
        if self.p_tilde_c is not None:
            d["p_tilde_c"] = self.p_tilde_c
        return d


def _jsonable(x):
    return "inf" if math.isinf(x) else x


def p_c(inputs):
    """Fujita-type branch 1 + 2(1+(1-g)(1-th)) / (n-2+2g(1-th))_+ ; +inf when
    the positive-part denominator vanishes."""
    n, g, th = inputs.n, inputs.gamma, inputs.theta
    den = n - 2.0 + 2.0 * g * (1.0 - th)
    if den <= 0.0:
        return math.inf
    return 1.0 + 2.0 * (1.0 + (1.0 - g) * (1.0 - th)) / den


def p_tilde_c(inputs):
    """Regularity-limited branch (6n+4-4(n+1)th) / (2s+n(3-2th)-4(1-g)(1-th))."""
    if inputs.s is None:
        raise ValueError("p_tilde_c requires the regularity index s")
    n, g, th, s = inputs.n, inputs.gamma, inputs.theta, inputs.s
    den = 2.0 * s + n * (3.0 - 2.0 * th) - 4.0 * (1.0 - g) * (1.0 - th)
    if den <= 0.0:
        raise ValueError(
            f"nonpositive denominator {den} for p_tilde_c at "
            f"(n={n}, gamma={g}, theta={th}, s={s})"
        )
    return (6.0 * n + 4.0 - 4.0 * (n + 1.0) * th) / den


def p_bar(inputs):
    """Threshold exponent: max of the available branches, with the argmax named.

    The memory branch 1/gamma wins for gamma <= (n-2)/n, the Fujita-type
    branch beyond; the regularity branch joins only for n >= 4 when s is
    given.  Ties at the branch boundary go to the memory branch.
    """
    pc = p_c(inputs)
    inv_g = 1.0 / inputs.gamma
    ptc = None
    if inputs.s is not None and inputs.n >= 4:
        ptc = p_tilde_c(inputs)
    best = max(pc, inv_g) if ptc is None else max(pc, inv_g, ptc)
    if ptc is not None and ptc >= best and ptc > max(pc, inv_g):
        binding = "regularity"
    elif pc > inv_g:
        binding = "fujita_type"
    else:
        binding = "memory"
    return ExponentReport(
        inputs=inputs, p_c=pc, inv_gamma=inv_g, p_tilde_c=ptc, p_bar=best, binding=binding
    )


def g_eta(eta, gamma, theta):
    """Fastest controllable decay rate at relative time scale eta >= 0.

    Piecewise-affine: (3-g)eta on [0, 2th], (2-g)eta + 2th on
    (2th, 2(1-th)], (1-g)eta + 2 beyond; identical to the minimum of the
    three affine branches with alpha = 1-g.  Both forms are evaluated and
    cross-checked.
    """
    eta = float(eta)
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    g, th = float(gamma), float(theta)
    a = 1.0 - g
    if eta <= 2.0 * th:
        piece = (3.0 - g) * eta
    elif eta <= 2.0 * (1.0 - th):
        piece = (2.0 - g) * eta + 2.0 * th
    else:
        piece = (1.0 - g) * eta + 2.0
    mins = min(a * eta + 2.0, (a + 1.0) * eta + 2.0 * th, (a + 2.0) * eta)
    if abs(piece - mins) > 1e-12 * max(1.0, abs(piece)):
        raise AssertionError(f"piecewise/min forms disagree: {piece} vs {mins}")
    return piece


def h_eta(eta, n, gamma, theta):
    """h(eta) = 1 + g(eta)/(n + eta - g(eta)); +inf on a degenerate denominator."""
    g = g_eta(eta, gamma, theta)
    den = n + eta - g
    if den <= 0.0:
        return math.inf
    return 1.0 + g / den


def h_argmax(n, gamma, theta):
    """Closed-form maximiser of h.

    For gamma > (n-2)/n the maximum sits at eta = 2(1-theta) and equals the
    Fujita-type exponent; otherwise h is nondecreasing and tends to
    1/gamma, reported as (inf, 1/gamma).
    """
    if gamma > (n - 2.0) / n:
        eta_star = 2.0 * (1.0 - theta)
        return eta_star, h_eta(eta_star, n, gamma, theta)
    return math.inf, 1.0 / gamma


def h_grid_argmax(n, gamma, theta, eta_max=50.0, step=1e-4):
    """Dense grid search over [0, eta_max]; cross-check for :func:`h_argmax`."""
    etas = np.arange(0.0, eta_max + step / 2, step)
    a = 1.0 - gamma
    g = np.minimum.reduce(
        [a * etas + 2.0, (a + 1.0) * etas + 2.0 * theta, (a + 2.0) * etas]
    )
    den = n + etas - g
    h = np.where(den > 0, 1.0 + g / np.where(den > 0, den, 1.0), np.inf)
    i = int(np.argmax(h))
    return float(etas[i]), float(h[i])


@dataclass(frozen=True)
class Classification:
    regime: str
    critical_nonexistence_covered: bool


def classify(inputs, p):
    """Regime of the power p against the threshold at this parameter point.

    The critical equality is tested at absolute tolerance 1e-12; the
    critical case is covered by the nonexistence analysis iff
    gamma > (n-2)/n.
    """
    report = p_bar(inputs)
    covered = inputs.gamma > (inputs.n - 2.0) / inputs.n
    if math.isfinite(report.p_bar) and abs(p - report.p_bar) <= CRITICAL_TOL:
        return Classification("critical", covered)
    if p < report.p_bar:
        return Classification("subcritical", covered)
    return Classification("supercritical", covered)


# ---------------------------------------------------------------------------
# atlas emission


def region_atlas(n, theta, s=None, gamma_grid=None, num=512):
    """Exponent table over a gamma grid, one dict per row.

    Rows carry gamma, p_c, inv_gamma, p_tilde_c (only for n >= 4 with s),
    p_bar and the binding branch, plus a flag marking where the regularity
    branch strictly dominates.
    """
    if gamma_grid is None:
        gamma_grid = np.linspace(0.0, 1.0, num + 2)[1:-1]
    rows = []
    with_tilde = s is not None and n >= 4
    for g in np.asarray(gamma_grid, dtype=float):
        rep = p_bar(ExponentInputs(n=n, gamma=float(g), theta=theta, s=s))
        row = {
            "gamma": float(g),
            "p_c": rep.p_c,
            "inv_gamma": rep.inv_gamma,
        }
        if with_tilde:
            row["p_tilde_c"] = rep.p_tilde_c
            row["tilde_dominant"] = rep.p_tilde_c > max(rep.p_c, rep.inv_gamma)
        row["p_bar"] = rep.p_bar
        row["binding"] = rep.binding
        rows.append(row)
    return rows


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def atlas_to_csv(rows, stream=None):
    """Write atlas rows as CSV; returns the text when no stream is given.

    Floats are emitted with shortest round-trip formatting so identical
    parameters reproduce identical bytes.
    """
    own = stream is None
    if own:
        stream = io.StringIO()
    writer = csv.writer(stream, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in header])
    if own:
        return stream.getvalue()
    return None


def atlas_to_json(rows):
    return json.dumps(
        [{k: _jsonable(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows],
        indent=None,
        separators=(",", ":"),
    )


# ---------------------------------------------------------------------------
# classical reference exponents


def p_fujita(n):
    """Heat-equation threshold 1 + 2/n."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return 1.0 + 2.0 / n


def p_strauss(n):
    """Wave-equation threshold: larger root of (n-1)p^2 - (n+1)p - 2 = 0.

    For n = 1 the quadratic degenerates to a linear equation with no root
    above 1; returns +inf.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return math.inf
    a, b, c = n - 1.0, -(n + 1.0), -2.0
    disc = math.sqrt(b * b - 4.0 * a * c)
    return (-b + disc) / (2.0 * a)
