"""Coupling thresholds beta_1, beta_2 and regime classification.

With tau = (4ps-2(p-1)N)/((p-1)N-2s) and sigma = 2s/((p-1)N-2s):

  beta_1:  max_i a_i^{-tau} mu_i^{-sigma} = sum_i a_i^{-tau} (mu_i+beta)^{-sigma}
  beta_2:  min_i a_i^{-tau} mu_i^{-sigma}
               = (a1^2+a2^2)^{q/d} / (mu1 a1^{2p} + 2 beta a1^p a2^p + mu2 a2^{2p})^sigma

Both right sides decrease strictly in beta, so plain bisection suffices.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoPositiveRoot, SolverError
from .params import SystemParams


class Regime(str, enum.Enum):
    BELOW_BETA1 = "BelowBeta1"
    BETWEEN = "Between"
    ABOVE_BETA2 = "AboveBeta2"
    DEGENERATE = "Degenerate"


def _log_levels(sys: SystemParams) -> tuple[float, float]:
    # logs throughout: sigma and tau blow up near the lower end of the p window
    P = sys.params
    return (-P.tau * math.log(sys.a1) - P.sigma * math.log(sys.mu1),
            -P.tau * math.log(sys.a2) - P.sigma * math.log(sys.mu2))


def _levels(sys: SystemParams) -> tuple[float, float]:
    return tuple(math.exp(x) for x in _log_levels(sys))


def log_beta1_rhs(sys: SystemParams, beta: float) -> float:
    P = sys.params
    return float(np.logaddexp(-P.tau * math.log(sys.a1) - P.sigma * math.log(sys.mu1 + beta),
                              -P.tau * math.log(sys.a2) - P.sigma * math.log(sys.mu2 + beta)))


def log_beta2_rhs(sys: SystemParams, beta: float) -> float:
    P = sys.params
    la1, la2, p = math.log(sys.a1), math.log(sys.a2), P.p
    terms = [math.log(sys.mu1) + 2 * p * la1, math.log(sys.mu2) + 2 * p * la2]
    if beta > 0:
        terms.append(math.log(2.0) + math.log(beta) + p * (la1 + la2))
    logS = float(np.logaddexp.reduce(terms))
    return P.q / P.gap * float(np.logaddexp(2 * la1, 2 * la2)) - P.sigma * logS


def beta1_rhs(sys: SystemParams, beta: float) -> float:
    return math.exp(log_beta1_rhs(sys, beta))


def beta2_rhs(sys: SystemParams, beta: float) -> float:
    return math.exp(log_beta2_rhs(sys, beta))


def _g1(sys: SystemParams):
    # log(rhs/lhs) relative to the dominant term, so a tiny root stays resolvable
    P = sys.params
    l1, l2 = _log_levels(sys)
    (mu_top, _), (mu_low, l_low) = sorted(((sys.mu1, l1), (sys.mu2, l2)),
                                          key=lambda t: t[1], reverse=True)
    lhs = max(l1, l2)
    off = l_low + P.sigma * math.log(mu_low) - lhs

    def g(b):
        log_top = -P.sigma * math.log1p(b / mu_top)
        log_low = off - P.sigma * math.log(mu_low + b)
        x = math.expm1(log_top) + math.exp(log_low)
        if x > -0.5:
            return math.log1p(x)
        return float(np.logaddexp(log_top, log_low))
    return g


def _g2(sys: SystemParams):
    lhs = min(_log_levels(sys))
    return lambda b: log_beta2_rhs(sys, b) - lhs


def beta1_residual(sys: SystemParams, beta: float) -> float:
    """|rhs/lhs - 1| of the beta_1 equation."""
    return abs(math.expm1(_g1(sys)(beta)))


def beta2_residual(sys: SystemParams, beta: float) -> float:
    return abs(math.expm1(_g2(sys)(beta)))


def bisect_decreasing(g, max_doublings: int = 2000, max_iter: int = 400) -> float:
    """Root of a strictly decreasing g with g(0) > 0, to the last representable bit.

    Bracket [0, 1] is doubled until g changes sign.
    """
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if g(hi) <= 0:
            break
        if not math.isfinite(2 * hi):
            raise SolverError("root lies beyond the floating-point range")
        lo, hi = hi, 2 * hi
    else:
        raise SolverError("no sign change found while doubling the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


def beta1(sys: SystemParams, consts=None) -> float:
    """Root of the beta_1 equation.

    ``consts`` (C0, C1) is accepted for interface symmetry; the defining
    equation does not involve them.
    """
    return bisect_decreasing(_g1(sys))


def beta2(sys: SystemParams) -> float:
    g = _g2(sys)
    if not g(0.0) > 0:
        raise NoPositiveRoot(
            f"beta_2 equation has no positive root: log right side at beta=0 exceeds "
            f"log left side by {g(0.0):.6g}")
    return bisect_decreasing(g)


def symmetric_threshold(params, mu: float) -> float:
    """beta_1 = beta_2 = mu (2^{((p-1)N-2s)/2s} - 1) when mu1=mu2 and a1=a2."""
    return mu * (2.0 ** (1.0 / params.sigma) - 1.0)


@dataclass(frozen=True)
class ThresholdReport:
    beta: float
    beta1: float
    beta2: float          # nan when Degenerate
    residual1: float
    residual2: float      # nan when Degenerate
    regime: Regime

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def classify(sys: SystemParams) -> ThresholdReport:
    """Regime of ``sys.beta``; below beta_1 takes precedence over everything else."""
    b1 = beta1(sys)
    r1 = beta1_residual(sys, b1)
    try:
        b2 = beta2(sys)
        r2 = beta2_residual(sys, b2)
    except NoPositiveRoot:
        b2 = r2 = math.nan
    return ThresholdReport(sys.beta, b1, b2, r1, r2, _regime(sys.beta, b1, b2))


def _regime(beta: float, b1: float, b2: float) -> Regime:
    if beta < b1:
        return Regime.BELOW_BETA1
    if math.isnan(b2):
        return Regime.DEGENERATE
    return Regime.ABOVE_BETA2 if beta > b2 else Regime.BETWEEN


def sweep(sys: SystemParams, betas) -> list[ThresholdReport]:
    b1 = beta1(sys)
    try:
        b2 = beta2(sys)
    except NoPositiveRoot:
        b2 = math.nan
    out = []
    for b in betas:
        s = sys.with_beta(float(b))
        out.append(ThresholdReport(s.beta, b1, b2, beta1_residual(s, b1),
                                   math.nan if math.isnan(b2) else beta2_residual(s, b2),
                                   _regime(s.beta, b1, b2)))
    return out
