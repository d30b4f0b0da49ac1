"""Scalar ground state of (-Delta)^s w + w = w^{2p-1} and its scaled family."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from . import spectral as sp
from .errors import (GridMismatch, GridTooSmall, InvalidParams, NoConvergence,
                     SolverError, Stagnation, UnsupportedNonlinearity, ZeroField)
from .params import ProblemParams
from .spectral import Field, Grid

EPS = 1e-300


@dataclass(frozen=True)
class SolverOpts:
    tol: float = 1e-8            # relative PDE residual
    step_tol: float = 1e-12      # sup-norm change between iterates
    max_iter: int = 10000
    tail_tol: float | None = 1e-6  # edge/peak bound, None disables the check
    stagnation_window: int = 500
    seed_tail_tol: float = 1e-8


@dataclass(frozen=True)
class ScalarGroundState:
    params: ProblemParams
    w0: Field
    C0: float
    C1: float
    Copt: float
    kinetic: float
    residual_pde: float
    residual_pohozaev: float
    iterations: int
    tail_ratio: float
    peak_offset: tuple
    min_value: float
    tail_tol: float | None = None
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> Grid:
        return self.w0.grid

    def summary(self) -> dict:
        P = self.params
        return {
            "params": {"N": P.N, "s": P.s, "p": P.p},
            "grid": self.grid.header(),
            "C0": self.C0, "C1": self.C1, "Copt": self.Copt,
            "kinetic": self.kinetic,
            "residual_pde": self.residual_pde,
            "residual_pohozaev": self.residual_pohozaev,
            "iterations": self.iterations,
            "tail_ratio": self.tail_ratio,
            "peak_offset": [float(x) for x in self.peak_offset],
            "min_value": self.min_value,
        }


@dataclass(frozen=True)
class ClosedForms:
    kinetic: float     # integral of |(-Delta)^{s/2} w|^2
    nonlinear: float   # integral of w^{2p}
    energy: float      # I_mu(w)


@dataclass(frozen=True)
class ScaledSolution:
    a: float
    mu: float
    lam: float
    w: Field
    closed_forms: ClosedForms

    @property
    def lambda_(self) -> float:
        return self.lam


@dataclass(frozen=True)
class NonlinearityDescriptor:
    """f(u) = sum_j c_j |u|^{q_j-1} u, given as ((c_1, q_1), (c_2, q_2), ...)."""

    terms: tuple

    def __post_init__(self):
        if callable(self.terms) or isinstance(self.terms, (str, bytes)):
            raise UnsupportedNonlinearity("only finite power sums are supported")
        clean = []
        try:
            items = list(self.terms)
        except TypeError:
            raise UnsupportedNonlinearity("terms must be (coefficient, power) pairs") from None
        for t in items:
            if not (isinstance(t, (tuple, list)) and len(t) == 2
                    and all(isinstance(x, Real) for x in t)):
                raise UnsupportedNonlinearity(f"not a power term: {t!r}")
            c, q = float(t[0]), float(t[1])
            if not (math.isfinite(c) and math.isfinite(q) and q >= 1):
                raise UnsupportedNonlinearity(f"power term needs finite c and q >= 1: {t!r}")
            clean.append((c, q))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def ground_state(cls, p: float, mu: float = 1.0, lam: float = 1.0):
        """-lam u + mu u^{2p-1}."""
        return cls(((-lam, 1.0), (mu, 2 * p - 1)))

    def u_f(self, u: Field) -> float:
        return sum(c * sp.lp_integral(u, q + 1) for c, q in self.terms)

    def primitive(self, u: Field) -> float:
        return sum(c / (q + 1) * sp.lp_integral(u, q + 1) for c, q in self.terms)


def _odd_power(a: np.ndarray, e: float) -> np.ndarray:
    # |a|^{e-1} a without 0^{negative} trouble
    return np.sign(a) * np.abs(a) ** e


def solve_w0(params: ProblemParams, grid: Grid, opts: SolverOpts | None = None,
             initial: Field | None = None) -> ScalarGroundState:
    """Petviashvili iteration for the positive ground state.

    Each sweep maps u to S^gamma (1+(-Delta)^s)^{-1}[u^{2p-1}] where the
    stabilising factor S tends to one at the fixed point.
    """
    opts = opts or SolverOpts()
    if grid.N != params.N:
        raise GridMismatch(f"grid dimension {grid.N} != N={params.N}")
    s, p = params.s, params.p
    if initial is None:
        seed_edge = math.exp(-(grid.L / 2) ** 2)
        if seed_edge >= opts.seed_tail_tol:
            raise GridTooSmall(f"box L={grid.L} too small for the Gaussian seed")
        u = np.exp(-grid.radius ** 2)
    else:
        if not grid.same_as(initial.grid):
            raise GridMismatch("initial guess lives on another grid")
        u = np.array(initial.values)

    sym = grid.symbol(s)
    lin = 1.0 + sym
    gamma = (2 * p - 1) / (2 * p - 2)
    wts = grid.plancherel
    hist = []
    best, since_best = math.inf, 0
    it = 0
    converged = False
    while it < opts.max_iter:
        it += 1
        uh = sp.rfft(grid, u)
        nh = sp.rfft(grid, _odd_power(u, 2 * p - 1))
        num = np.sum(wts * lin * (uh.real ** 2 + uh.imag ** 2))
        den = np.sum(wts * (uh.real * nh.real + uh.imag * nh.imag))
        if not den > 0:
            raise SolverError("iterate collapsed (nonpositive nonlinear pairing)")
        S = num / den
        un = S ** gamma * sp.irfft(grid, nh / lin)
        step = float(np.max(np.abs(un - u)))
        u = un
        dev = abs(S - 1.0)
        hist.append(dev)
        if not np.all(np.isfinite(u)):
            raise SolverError("iteration diverged")
        if step < opts.step_tol:
            res = _pde_residual(grid, u, s, p)
            if res < opts.tol:
                converged = True
                break
        if dev < best * 0.999:
            best, since_best = dev, 0
        else:
            since_best += 1
            if since_best >= opts.stagnation_window:
                raise Stagnation(
                    f"stabilising factor stuck at |S-1|={dev:.3e} after {it} iterations")
    if not converged:
        raise NoConvergence(f"no convergence within {opts.max_iter} iterations "
                            f"(last |S-1|={hist[-1]:.3e})")

    w0 = Field(grid, u)
    if w0.min() < -1e-14:
        raise SolverError(f"ground state lost positivity (min {w0.min():.3e})")
    ratio = sp.tail_ratio(w0)
    if opts.tail_tol is not None and ratio > opts.tail_tol:
        raise GridTooSmall(f"edge/peak ratio {ratio:.3e} exceeds {opts.tail_tol:.1e}; enlarge L")
    C0 = sp.mass(w0)
    C1 = sp.lp_integral(w0, 2 * p)
    kin = sp.hs_seminorm_sq(w0, s)
    return ScalarGroundState(
        params=params, w0=w0, C0=C0, C1=C1, Copt=copt_closed_form(params, C0, C1),
        kinetic=kin, residual_pde=res,
        residual_pohozaev=abs(kin / (params.pohozaev_factor * C1) - 1.0),
        iterations=it, tail_ratio=ratio, peak_offset=tuple(sp.peak_offset(w0)),
        min_value=w0.min(), tail_tol=opts.tail_tol, history=tuple(hist))


def _pde_residual(grid: Grid, u: np.ndarray, s: float, p: float) -> float:
    r = sp.apply_multiplier(grid, u, grid.symbol(s)) + u - _odd_power(u, 2 * p - 1)
    return float(np.linalg.norm(r) / np.linalg.norm(u))


def pde_residual(w: Field, params: ProblemParams) -> float:
    """||(-Delta)^s w + w - w^{2p-1}|| / ||w||."""
    return _pde_residual(w.grid, w.values, params.s, params.p)


def copt_closed_form(params: ProblemParams, C0: float, C1: float) -> float:
    P = params
    two_ps = 2 * P.p * P.s
    return ((two_ps / P.q) ** (P.q / (2 * P.s))
            / (C0 ** ((two_ps - P.q) / (2 * P.s)) * C1 ** (P.gap / (2 * P.s))))


def compute_constants(gs: ScalarGroundState) -> tuple[float, float, float]:
    return gs.C0, gs.C1, gs.Copt


def gns_ratio(u: Field, params: ProblemParams, Copt: float) -> float:
    """int|u|^{2p} / (Copt kin^{q/2s} mass^{(2ps-q)/2s}); at most one for every u."""
    P = params
    kin = sp.hs_seminorm_sq(u, P.s)
    m = sp.mass(u)
    den = Copt * kin ** (P.q / (2 * P.s)) * m ** ((2 * P.p * P.s - P.q) / (2 * P.s))
    if den < EPS:
        raise ZeroField("GNS ratio undefined for a constant or zero field")
    return sp.lp_integral(u, 2 * P.p) / den


def pohozaev_residual(w: Field, f_desc: NonlinearityDescriptor, s: float) -> float:
    """Relative defect of (N-2s) int w f(w) = 2N int F(w)."""
    if not isinstance(f_desc, NonlinearityDescriptor):
        raise UnsupportedNonlinearity("f_desc must be a NonlinearityDescriptor")
    N = w.grid.N
    lhs = (N - 2 * s) * f_desc.u_f(w)
    rhs = 2 * N * f_desc.primitive(w)
    scale = max(abs(lhs), abs(rhs))
    if scale < EPS:
        return 0.0
    return abs(lhs - rhs) / scale


def pohozaev_ratio(gs: ScalarGroundState) -> float:
    """kinetic / (pohozaev_factor C1); equals one for an exact ground state."""
    return gs.kinetic / (gs.params.pohozaev_factor * gs.C1)


# -- scaled family ----------------------------------------------------------

def scaled_lambda(params: ProblemParams, C0: float, a: float, mu: float) -> float:
    P = params
    return ((C0 / a ** 2) ** (P.p - 1) / mu) ** (2 * P.s / P.gap)


def scaled_amplitude(params: ProblemParams, C0: float, a: float, mu: float) -> float:
    P = params
    return (C0 ** (2 * P.s) / (mu ** P.N * a ** (4 * P.s))) ** (1.0 / (2 * P.q - 4 * P.s))


def mu0(params: ProblemParams, C0: float, a: float) -> float:
    """The coupling at which the scaled multiplier equals one."""
    return (C0 / a ** 2) ** (params.p - 1)


def closed_forms(params: ProblemParams, C0: float, C1: float, a: float, mu: float) -> ClosedForms:
    P = params
    d = P.gap
    base = C1 * C0 ** ((2 * P.p * P.s - P.q) / d) / a ** P.tau
    kc = base / mu ** P.sigma
    return ClosedForms(
        kinetic=P.pohozaev_factor * kc,
        nonlinear=base / mu ** (P.q / d),
        energy=d / (4 * P.p * P.s) * kc,
    )


def scaled_solution(a: float, mu: float, gs: ScalarGroundState,
                    tail_tol: float | None = None) -> ScaledSolution:
    """w_{a,mu} realised by rescaling the box of w0 (no interpolation)."""
    for k, v in (("a", a), ("mu", mu)):
        if not (isinstance(v, Real) and math.isfinite(v) and v > 0):
            raise InvalidParams(f"{k} must be positive and finite, got {v!r}")
    P = gs.params
    tol = gs.tail_tol if tail_tol is None else tail_tol
    if tol is not None and gs.tail_ratio > tol:
        raise GridTooSmall(f"rescaled profile edge/peak {gs.tail_ratio:.3e} exceeds {tol:.1e}")
    lam = scaled_lambda(P, gs.C0, a, mu)
    amp = scaled_amplitude(P, gs.C0, a, mu)
    grid = gs.grid.rescaled(lam ** (-1.0 / (2 * P.s)))
    w = Field(grid, amp * gs.w0.values)
    return ScaledSolution(a=a, mu=mu, lam=lam, w=w,
                          closed_forms=closed_forms(P, gs.C0, gs.C1, a, mu))


def scaled_solution_on_grid(params: ProblemParams, a: float, mu: float, target: Grid,
                            opts: SolverOpts | None = None, max_rounds: int = 8,
                            ) -> tuple[ScalarGroundState, ScaledSolution]:
    """w_{a,mu} sampled exactly on ``target``.

    w0 is solved on the pre-image box L0 = L_target * lambda^{1/2s}; since
    lambda depends on C0, which depends weakly on L0, this is a short
    fixed-point loop with warm starts.
    """
    opts = opts or SolverOpts()
    P = params
    # C0 of w0 is O(1); start from 1 and let the loop correct it
    L0 = target.L * scaled_lambda(P, 1.0, a, mu) ** (1 / (2 * P.s))
    gs = None
    for _ in range(max_rounds):
        g0 = Grid(target.N, target.M, L0)
        init = None if gs is None else Field(g0, gs.w0.values)
        gs = solve_w0(P, g0, opts, initial=init)
        L_new = target.L * scaled_lambda(P, gs.C0, a, mu) ** (1 / (2 * P.s))
        done = math.isclose(L_new, L0, rel_tol=1e-14)
        L0 = L_new
        if done:
            break
    sol = scaled_solution(a, mu, gs, tail_tol=opts.tail_tol)
    # the realised box equals target.L to rounding; pin it
    sol = ScaledSolution(a=sol.a, mu=sol.mu, lam=sol.lam, w=Field(target, sol.w.values),
                         closed_forms=sol.closed_forms)
    return gs, sol


def scalar_energy(w: Field, mu: float, s: float, p: float) -> float:
    """I_mu(w) = 1/2 kin - mu/(2p) int |w|^{2p}."""
    kin = sp.hs_seminorm_sq(w, s)
    if mu == 0:
        return 0.5 * kin
    return 0.5 * kin - mu / (2 * p) * sp.lp_integral(w, 2 * p)
