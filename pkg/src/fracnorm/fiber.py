"""Fiber dilations, Pohozaev functionals and Rayleigh quotients.

The dilation (l*u)(x) = e^{Nsl/2} u(e^{sl} x) is represented exactly: the
samples are multiplied by e^{Nsl/2} and the box is shrunk by e^{-sl}.  Under
it the kinetic term scales by e^{2 s^2 l}, the 2p-integrals by e^{(p-1)Nsl}
and the mass is unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .errors import DegeneratePair, ZeroField
from .params import ProblemParams, SystemParams
from .spectral import Field

EPS = 1e-300


def dilate(u: Field, l: float, s: float) -> Field:
    if l == 0:
        return u
    g = u.grid
    return Field(g.rescaled(math.exp(-s * l)), math.exp(0.5 * g.N * s * l) * u.values)


@dataclass(frozen=True)
class FunctionalTriple:
    kin_u: float
    kin_v: float
    nl_u: float       # int |u|^{2p}
    nl_v: float       # int |v|^{2p}
    nl_cross: float   # int |u|^p |v|^p

    @property
    def kinetic(self) -> float:
        return self.kin_u + self.kin_v

    def nonlinear(self, sys: SystemParams) -> float:
        return sys.mu1 * self.nl_u + 2 * sys.beta * self.nl_cross + sys.mu2 * self.nl_v

    def energy(self, sys: SystemParams) -> float:
        return 0.5 * self.kinetic - self.nonlinear(sys) / (2 * sys.params.p)

    def dilated(self, l: float, params: ProblemParams) -> "FunctionalTriple":
        ek = math.exp(2 * params.s ** 2 * l)
        en = math.exp(params.q * params.s * l)
        return FunctionalTriple(self.kin_u * ek, self.kin_v * ek,
                                self.nl_u * en, self.nl_v * en, self.nl_cross * en)


def functionals(u: Field, v: Field, params: ProblemParams) -> FunctionalTriple:
    g = sp.check_same_grid(u, v)
    s, p = params.s, params.p
    au, av = np.abs(u.values), np.abs(v.values)
    pu, pv = au ** p, av ** p
    return FunctionalTriple(
        kin_u=sp.hs_seminorm_sq(u, s), kin_v=sp.hs_seminorm_sq(v, s),
        nl_u=g.cell * float(np.sum(pu * pu)), nl_v=g.cell * float(np.sum(pv * pv)),
        nl_cross=g.cell * float(np.sum(pu * pv)))


# -- scalar fiber -------------------------------------------------------------

def _scalar_parts(u: Field, params: ProblemParams) -> tuple[float, float]:
    return sp.hs_seminorm_sq(u, params.s), sp.lp_integral(u, 2 * params.p)


def fiber_energy_from_parts(kin: float, nl: float, mu: float, l, params: ProblemParams):
    P = params
    l = np.asarray(l, dtype=float)
    val = 0.5 * np.exp(2 * P.s ** 2 * l) * kin - mu / (2 * P.p) * np.exp(P.q * P.s * l) * nl
    return val if val.ndim else float(val)


def fiber_derivative_from_parts(kin: float, nl: float, mu: float, l, params: ProblemParams):
    P = params
    l = np.asarray(l, dtype=float)
    val = (P.s ** 2 * np.exp(2 * P.s ** 2 * l) * kin
           - mu * P.q * P.s / (2 * P.p) * np.exp(P.q * P.s * l) * nl)
    return val if val.ndim else float(val)


def fiber_energy_scalar(u: Field, mu: float, l, params: ProblemParams):
    """f_u(l) = I_mu(l*u) from the scaling laws; ``l`` may be an array."""
    kin, nl = _scalar_parts(u, params)
    return fiber_energy_from_parts(kin, nl, mu, l, params)


def fiber_derivative_scalar(u: Field, mu: float, l, params: ProblemParams):
    kin, nl = _scalar_parts(u, params)
    return fiber_derivative_from_parts(kin, nl, mu, l, params)


def _fiber_root(kin: float, nl_weighted: float, params: ProblemParams) -> float:
    # e^{s d l} = kin / (factor * nl)
    return math.log(kin / (params.pohozaev_factor * nl_weighted)) / (params.s * params.gap)


def optimal_fiber_param(u: Field, mu: float, params: ProblemParams) -> float:
    """The unique maximiser of f_u."""
    kin, nl = _scalar_parts(u, params)
    if kin < EPS or mu * nl < EPS:
        raise ZeroField("fiber optimum needs nonzero kinetic and nonlinear parts")
    return _fiber_root(kin, mu * nl, params)


def pohozaev_scalar(u: Field, mu: float, params: ProblemParams) -> float:
    kin, nl = _scalar_parts(u, params)
    return kin - params.pohozaev_factor * mu * nl


def fiber_curve(u: Field, mu: float, ls, params: ProblemParams) -> np.ndarray:
    """Rows (l, f_u(l), f_u'(l))."""
    kin, nl = _scalar_parts(u, params)
    ls = np.asarray(ls, dtype=float)
    return np.column_stack([ls, fiber_energy_from_parts(kin, nl, mu, ls, params),
                            fiber_derivative_from_parts(kin, nl, mu, ls, params)])


# -- coupled fiber ------------------------------------------------------------

def system_G(u: Field, v: Field, sys: SystemParams) -> float:
    t = functionals(u, v, sys.params)
    return t.kinetic - sys.params.pohozaev_factor * t.nonlinear(sys)


def system_G_from(t: FunctionalTriple, sys: SystemParams) -> float:
    return t.kinetic - sys.params.pohozaev_factor * t.nonlinear(sys)


def fiber_param_from(t: FunctionalTriple, sys: SystemParams) -> float:
    nl = t.nonlinear(sys)
    if nl < EPS or t.kinetic < EPS:
        raise DegeneratePair("pair has vanishing nonlinear or kinetic integral")
    return _fiber_root(t.kinetic, nl, sys.params)


def project_to_F(u: Field, v: Field, sys: SystemParams) -> tuple[float, Field, Field]:
    """The unique fiber point l*(u,v) lying on the Pohozaev set F."""
    t = functionals(u, v, sys.params)
    l = fiber_param_from(t, sys)
    s = sys.params.s
    return l, dilate(u, l, s), dilate(v, l, s)


def rayleigh_prefactor(params: ProblemParams) -> float:
    """R0 = ((p-1)N-2s)/(2(p-1)N) * (2ps/((p-1)N))^{2s/((p-1)N-2s)}."""
    P = params
    return P.gap / (2 * P.q) * (2 * P.p * P.s / P.q) ** P.sigma


def rayleigh_from(kin: float, nl: float, params: ProblemParams) -> float:
    if nl < EPS:
        raise DegeneratePair("Rayleigh quotient needs a positive nonlinear integral")
    P = params
    return rayleigh_prefactor(P) * kin ** (P.q / P.gap) / nl ** P.sigma


def rayleigh(u: Field, v: Field, sys: SystemParams) -> float:
    t = functionals(u, v, sys.params)
    return rayleigh_from(t.kinetic, t.nonlinear(sys), sys.params)


def rayleigh_scalar(u: Field, mu: float, params: ProblemParams) -> float:
    kin, nl = _scalar_parts(u, params)
    return rayleigh_from(kin, mu * nl, params)
