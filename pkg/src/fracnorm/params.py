"""Parameter records for the scalar and the coupled problem."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParams


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, fractional order ``s`` and power ``p``.

    With ``strict=True`` (default) the admissible window
    ``0<s<1``, ``2s<N<=4s`` and ``1+2s/N < p < N/(N-2s)`` is enforced.
    ``strict=False`` admits sanity-check configurations such as ``s=1``.
    """

    N: int
    s: float
    p: float
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise InvalidParams(f"N must be 1, 2 or 3, got {self.N}")
        if not (0.0 < self.s <= 1.0):
            raise InvalidParams(f"s must lie in (0,1), got {self.s}")
        if self.p <= 1.0:
            raise InvalidParams(f"p must exceed 1, got {self.p}")
        if not self.strict:
            return
        N, s, p = self.N, self.s, self.p
        if not s < 1.0:
            raise InvalidParams(f"s must lie in (0,1), got {s}")
        if not (2 * s < N <= 4 * s):
            raise InvalidParams(f"dimension window 2s<N<=4s violated: N={N}, s={s}")
        lo, hi = 1 + 2 * s / N, N / (N - 2 * s)
        if not (lo < p < hi):
            raise InvalidParams(
                f"p={p} outside the window 1+2s/N<p<N/(N-2s) = ({lo:.6g}, {hi:.6g})")

    @property
    def q(self) -> float:
        """(p-1)N, the homogeneity of the nonlinear term under dilation."""
        return (self.p - 1) * self.N

    @property
    def gap(self) -> float:
        """(p-1)N - 2s; positive in the mass-supercritical window."""
        return self.q - 2 * self.s

    @property
    def sigma(self) -> float:
        return 2 * self.s / self.gap

    @property
    def tau(self) -> float:
        return (4 * self.p * self.s - 2 * self.q) / self.gap

    @property
    def pohozaev_factor(self) -> float:
        """(p-1)N / (2ps): kinetic = factor * nonlinear on the Pohozaev set."""
        return self.q / (2 * self.p * self.s)


@dataclass(frozen=True)
class SystemParams:
    params: ProblemParams
    mu1: float
    mu2: float
    beta: float
    a1: float
    a2: float

    def __post_init__(self):
        for name in ("mu1", "mu2", "a1", "a2"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive, got {getattr(self, name)}")
        if not self.beta >= 0:
            raise InvalidParams(f"beta must be nonnegative, got {self.beta}")

    def with_beta(self, beta: float) -> "SystemParams":
        return SystemParams(self.params, self.mu1, self.mu2, beta, self.a1, self.a2)

    @property
    def symmetric(self) -> bool:
        return self.mu1 == self.mu2 and self.a1 == self.a2
