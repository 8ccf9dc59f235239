"""Problem parameter quadruple threaded through solver and probes."""

from dataclasses import dataclass


@dataclass(frozen=True)
class FracParams:
    """(n, gamma, theta, p) with the derived memory order alpha = 1 - gamma."""

    n: int
    gamma: float
    theta: float
    p: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 <= self.theta < 0.5:
            raise ValueError(f"theta must lie in [0, 1/2), got {self.theta}")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")

    @property
    def alpha(self):
        return 1.0 - self.gamma

    @property
    def p_conjugate(self):
        """Hoelder dual p/(p-1); computed here once and threaded everywhere."""
        return self.p / (self.p - 1.0)
