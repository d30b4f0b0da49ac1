"""Normalized solutions of the coupled system

    (-Delta)^s u + lambda1 u = mu1 |u|^{2p-2} u + beta |v|^p |u|^{p-2} u
    (-Delta)^s v + lambda2 v = mu2 |v|^{2p-2} v + beta |u|^p |v|^{p-2} v

with masses a1^2, a2^2.  Two solvers: Newton continuation in beta from the
uncoupled pair (small coupling) and Rayleigh-quotient descent followed by a
Newton polish (large coupling).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from . import spectral as sp
from .errors import (NegativeMultiplier, NoConvergence, RegimeError, StepCollapse,
                     ZeroField)
from .fiber import (dilate, fiber_param_from, functionals, project_to_F,
                    rayleigh_from, system_G_from)
from .params import ProblemParams, SystemParams
from .scalar import (ScalarGroundState, SolverOpts, closed_forms, scaled_amplitude,
                     scaled_lambda, scaled_solution, scaled_solution_on_grid)
from .spectral import Field, Grid, make_grid
from .thresholds import Regime, classify

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoupledOpts:
    newton_tol: float = 1e-10       # relative Euler-Lagrange residual
    newton_max_iter: int = 25
    gmres_rtol: float = 1e-10
    gmres_restart: int = 60
    gmres_maxiter: int = 10
    descent_tol: float = 1e-4       # dual norm of the projected Rayleigh gradient
    descent_max_iter: int = 3000
    sobolev_shift: float | None = None   # None: K/(a1^2+a2^2)
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    descent_max_points: int = 1 << 16   # descent runs on a coarsened copy of larger grids
    regauge_passes: int = 6
    regauge_tol: float = 1e-3       # fiber shift accepted before the final projection
    step_floor: float = 1e-6        # continuation floor, relative to beta_1
    positivity_floor: float = 1e-14
    seed: int = 0
    force: bool = False
    scalar: SolverOpts = field(default_factory=SolverOpts)


@dataclass(frozen=True)
class CoupledSolution:
    sys: SystemParams
    u: Field
    v: Field
    lambda1: float
    lambda2: float
    energy: float
    G_defect: float
    el_residual: float
    regime: Regime
    rayleigh: float
    mass_error: tuple
    min_values: tuple
    solver: str = ""
    fiber_shift: float = 0.0
    iterations: int = 0
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def checks(self, mass_tol=1e-8, G_tol=1e-8, el_tol=1e-6) -> dict:
        fl = -1e-14
        return {
            "mass": max(self.mass_error) < mass_tol,
            "G_defect": self.G_defect < G_tol,
            "el_residual": self.el_residual < el_tol,
            "lambda_positive": self.lambda1 > 0 and self.lambda2 > 0,
            "positive": min(self.min_values) > fl,
        }

    def summary(self) -> dict:
        S = self.sys
        P = S.params
        return {
            "params": {"N": P.N, "s": P.s, "p": P.p},
            "system": {"mu1": S.mu1, "mu2": S.mu2, "beta": S.beta, "a1": S.a1, "a2": S.a2},
            "grid": self.grid.header(),
            "lambda1": self.lambda1, "lambda2": self.lambda2,
            "energy": self.energy, "rayleigh": self.rayleigh,
            "G_defect": self.G_defect, "el_residual": self.el_residual,
            "mass_error": list(self.mass_error), "min_values": list(self.min_values),
            "regime": self.regime.value, "solver": self.solver,
            "fiber_shift": self.fiber_shift, "iterations": self.iterations,
            "checks": self.checks(),
        }


# -- pointwise nonlinear terms -----------------------------------------------

def _opow(a, e):
    return np.sign(a) * np.abs(a) ** e


def _nonlinear_terms(u, v, sys: SystemParams):
    p = sys.params.p
    pu = np.abs(u) ** p
    pv = np.abs(v) ** p
    nu = sys.mu1 * _opow(u, 2 * p - 1) + sys.beta * pv * _opow(u, p - 1)
    nv = sys.mu2 * _opow(v, 2 * p - 1) + sys.beta * pu * _opow(v, p - 1)
    return nu, nv


def _abs_pow(a, e):
    # |a|^e with 0^e := 0 even for e < 0
    aa = np.abs(a)
    with np.errstate(divide="ignore"):
        return np.where(aa > 0, aa ** e, 0.0)


def energy(u: Field, v: Field, sys: SystemParams) -> float:
    return functionals(u, v, sys.params).energy(sys)


def el_gradient(u: Field, v: Field, sys: SystemParams, lambda1: float, lambda2: float
                ) -> tuple[Field, Field]:
    g = sp.check_same_grid(u, v)
    sym = g.symbol(sys.params.s)
    nu, nv = _nonlinear_terms(u.values, v.values, sys)
    ru = sp.apply_multiplier(g, u.values, sym) + lambda1 * u.values - nu
    rv = sp.apply_multiplier(g, v.values, sym) + lambda2 * v.values - nv
    return Field(g, ru), Field(g, rv)


def el_residual(u: Field, v: Field, sys: SystemParams, lambda1: float, lambda2: float
                ) -> float:
    ru, rv = el_gradient(u, v, sys, lambda1, lambda2)
    num = np.sum(ru.values ** 2) + np.sum(rv.values ** 2)
    den = np.sum(u.values ** 2) + np.sum(v.values ** 2)
    return float(math.sqrt(num / den))


def extract_multipliers(u: Field, v: Field, sys: SystemParams) -> tuple[float, float]:
    """lambda_i from testing the i-th equation with its own component."""
    m1, m2 = sp.mass(u), sp.mass(v)
    if m1 <= 0 or m2 <= 0:
        raise ZeroField("multipliers need both components nonzero")
    t = functionals(u, v, sys.params)
    l1 = -(t.kin_u - sys.mu1 * t.nl_u - sys.beta * t.nl_cross) / m1
    l2 = -(t.kin_v - sys.mu2 * t.nl_v - sys.beta * t.nl_cross) / m2
    return l1, l2


def build_solution(u: Field, v: Field, sys: SystemParams, lambda1=None, lambda2=None,
                   solver="", fiber_shift=0.0, iterations=0, history=(),
                   regime: Regime | None = None) -> CoupledSolution:
    if lambda1 is None or lambda2 is None:
        lambda1, lambda2 = extract_multipliers(u, v, sys)
    t = functionals(u, v, sys.params)
    nl = t.nonlinear(sys)
    return CoupledSolution(
        sys=sys, u=u, v=v, lambda1=float(lambda1), lambda2=float(lambda2),
        energy=t.energy(sys),
        G_defect=abs(system_G_from(t, sys)) / t.kinetic,
        el_residual=el_residual(u, v, sys, lambda1, lambda2),
        regime=classify(sys).regime if regime is None else regime,
        rayleigh=rayleigh_from(t.kinetic, nl, sys.params) if nl > 0 else math.nan,
        mass_error=(abs(sp.mass(u) / sys.a1 ** 2 - 1), abs(sp.mass(v) / sys.a2 ** 2 - 1)),
        min_values=(u.min(), v.min()),
        solver=solver, fiber_shift=float(fiber_shift), iterations=int(iterations),
        history=tuple(history))


def _require_positive(sol: CoupledSolution) -> CoupledSolution:
    if not (sol.lambda1 > 0 and sol.lambda2 > 0):
        err = NegativeMultiplier(
            f"nonpositive multiplier(s) lambda1={sol.lambda1:.6g}, lambda2={sol.lambda2:.6g}; "
            f"G_defect={sol.G_defect:.2e}, el_residual={sol.el_residual:.2e} "
            f"(suggests box or resolution error)")
        err.solution = sol
        raise err
    return sol


# -- symmetric oracle --------------------------------------------------------

def symmetric_oracle(a: float, mu: float, beta: float, gs: ScalarGroundState
                     ) -> CoupledSolution:
    """With mu1=mu2=mu and a1=a2=a the pair (w_{a,mu+beta}, w_{a,mu+beta}) is exact."""
    ss = scaled_solution(a, mu + beta, gs)
    sys = SystemParams(gs.params, mu, mu, beta, a, a)
    return build_solution(ss.w, ss.w, sys, ss.lam, ss.lam, solver="symmetric-oracle")


def symmetric_oracle_on_grid(params: ProblemParams, a: float, mu: float, beta: float,
                             grid: Grid, opts: SolverOpts | None = None) -> CoupledSolution:
    """As :func:`symmetric_oracle` but sampled exactly on ``grid``."""
    _, ss = scaled_solution_on_grid(params, a, mu + beta, grid, opts)
    sys = SystemParams(params, mu, mu, beta, a, a)
    return build_solution(ss.w, ss.w, sys, ss.lam, ss.lam, solver="symmetric-oracle")


# -- Newton-Krylov corrector ------------------------------------------------

@dataclass
class _NewtonResult:
    u: np.ndarray
    v: np.ndarray
    lam1: float
    lam2: float
    iterations: int
    history: list


def _newton(grid: Grid, u, v, lam1, lam2, sys: SystemParams, opts: CoupledOpts
            ) -> _NewtonResult:
    """Newton on {EL equations, mass constraints} in (u, v, lambda1, lambda2).

    Unknowns are scaled by sqrt(h^N) so that Euclidean products are L2
    products.  The Krylov solve is left-preconditioned by the exact inverse
    of the bordered operator [[lambda + |k|^{2s}, u~], [u~^T, 0]] per block.
    """
    P = sys.params
    p = P.p
    n = grid.size
    shape = grid.shape
    sym = grid.symbol(P.s)
    sq = math.sqrt(grid.cell)
    a1s, a2s = sys.a1 ** 2, sys.a2 ** 2
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    hist = []
    res0 = None

    def flap(a):
        return sp.apply_multiplier(grid, a.reshape(shape), sym).ravel()

    for it in range(opts.newton_max_iter + 1):
        nu, nv = _nonlinear_terms(u, v, sys)
        ru = sp.apply_multiplier(grid, u, sym) + lam1 * u - nu
        rv = sp.apply_multiplier(grid, v, sym) + lam2 * v - nv
        c1 = 0.5 * (grid.cell * np.sum(u * u) - a1s)
        c2 = 0.5 * (grid.cell * np.sum(v * v) - a2s)
        rel = math.sqrt((np.sum(ru ** 2) + np.sum(rv ** 2)) / (np.sum(u ** 2) + np.sum(v ** 2)))
        merr = max(abs(c1) / a1s, abs(c2) / a2s)
        hist.append({"iter": it, "el_residual": rel, "mass_error": merr,
                     "lambda1": lam1, "lambda2": lam2})
        log.debug("newton %d: res=%.3e mass=%.3e", it, rel, merr)
        if not math.isfinite(rel):
            raise NoConvergence("Newton iterate became non-finite")
        if res0 is None:
            res0 = rel
        elif rel > 1e3 * max(res0, 1e-6):
            raise NoConvergence(f"Newton diverging (residual {rel:.3e})")
        if rel < opts.newton_tol and merr < 1e-13:
            return _NewtonResult(u, v, lam1, lam2, it, hist)
        if it == opts.newton_max_iter:
            break

        au, av = np.abs(u), np.abs(v)
        puu = ((2 * p - 1) * sys.mu1 * au ** (2 * p - 2)
               + sys.beta * (p - 1) * av ** p * _abs_pow(u, p - 2)).ravel()
        pvv = ((2 * p - 1) * sys.mu2 * av ** (2 * p - 2)
               + sys.beta * (p - 1) * au ** p * _abs_pow(v, p - 2)).ravel()
        puv = (sys.beta * p * _opow(u, p - 1) * _opow(v, p - 1)).ravel()
        ut, vt = sq * u.ravel(), sq * v.ravel()
        D1 = lam1 + sym
        D2 = lam2 + sym
        if np.min(D1) <= 0 or np.min(D2) <= 0:
            raise NoConvergence("multiplier left the positive range during Newton")

        def dinv(D, a):
            return sp.irfft(grid, sp.rfft(grid, a.reshape(shape)) / D).ravel()

        Du, Dv = dinv(D1, ut), dinv(D2, vt)
        su, sv = ut @ Du, vt @ Dv

        def prec(x):
            x1 = dinv(D1, x[:n])
            x2 = dinv(D2, x[n:2 * n])
            d1 = (ut @ x1 - x[2 * n]) / su
            d2 = (vt @ x2 - x[2 * n + 1]) / sv
            return np.concatenate([x1 - d1 * Du, x2 - d2 * Dv, [d1, d2]])

        def jac(x):
            du, dv = x[:n], x[n:2 * n]
            j1 = flap(du) + lam1 * du - puu * du - puv * dv + x[2 * n] * ut
            j2 = flap(dv) + lam2 * dv - pvv * dv - puv * du + x[2 * n + 1] * vt
            return np.concatenate([j1, j2, [ut @ du, vt @ dv]])

        A = LinearOperator((2 * n + 2,) * 2, matvec=lambda x: prec(jac(x)))
        rhs = prec(-np.concatenate([sq * ru.ravel(), sq * rv.ravel(), [c1, c2]]))
        x, info = gmres(A, rhs, rtol=opts.gmres_rtol, restart=opts.gmres_restart,
                        maxiter=opts.gmres_maxiter)
        u = u + (x[:n] / sq).reshape(shape)
        v = v + (x[n:2 * n] / sq).reshape(shape)
        lam1 += float(x[2 * n])
        lam2 += float(x[2 * n + 1])
    raise NoConvergence(f"Newton did not converge in {opts.newton_max_iter} steps "
                        f"(residual {hist[-1]['el_residual']:.3e})")


# -- Theorem 1.1 regime: continuation ----------------------------------------

def _uncoupled_seed(sys: SystemParams, grid: Grid, opts: CoupledOpts):
    P = sys.params
    _, s1 = scaled_solution_on_grid(P, sys.a1, sys.mu1, grid, opts.scalar)
    if (sys.a1, sys.mu1) == (sys.a2, sys.mu2):
        s2 = s1
    else:
        _, s2 = scaled_solution_on_grid(P, sys.a2, sys.mu2, grid, opts.scalar)
    return s1, s2


def solve_continuation(sys: SystemParams, grid: Grid, opts: CoupledOpts | None = None
                       ) -> CoupledSolution:
    """Newton continuation in beta from the exact uncoupled pair."""
    opts = opts or CoupledOpts()
    rep = classify(sys)
    if rep.regime is not Regime.BELOW_BETA1 and not opts.force:
        raise RegimeError(f"continuation covers beta < beta1={rep.beta1:.6g}; "
                          f"got beta={sys.beta:.6g} ({rep.regime.value})")
    s1, s2 = _uncoupled_seed(sys, grid, opts)
    if sys.beta == 0:
        sol = build_solution(s1.w, s2.w, sys, s1.lam, s2.lam, solver="continuation",
                             regime=rep.regime)
        return _require_positive(sol)

    target = sys.beta
    state = (s1.w.values, s2.w.values, s1.lam, s2.lam)
    prev = None
    b_cur, b_prev = 0.0, None
    step = target
    floor = opts.step_floor * rep.beta1
    hist = []
    total = 0
    while b_cur < target:
        b_try = min(b_cur + step, target)
        if prev is None:
            guess = state
        else:
            w = (b_try - b_cur) / (b_cur - b_prev)
            guess = tuple(c + w * (c - q) for c, q in zip(state, prev))
        try:
            r = _newton(grid, guess[0], guess[1], guess[2], guess[3],
                        sys.with_beta(b_try), opts)
        except NoConvergence as exc:
            step *= 0.5
            hist.append({"beta": b_try, "ok": False, "reason": str(exc)})
            if step < floor:
                raise StepCollapse(f"continuation step fell below {floor:.3e} "
                                   f"at beta={b_cur:.6g}") from exc
            continue
        total += r.iterations
        hist.append({"beta": b_try, "ok": True, "newton_iterations": r.iterations,
                     "el_residual": r.history[-1]["el_residual"]})
        prev, b_prev = state, b_cur
        state, b_cur = (r.u, r.v, r.lam1, r.lam2), b_try
        step *= 2.0

    u, v = Field(grid, state[0]), Field(grid, state[1])
    l, u, v = project_to_F(u, v, sys)
    sol = build_solution(u, v, sys, solver="continuation", fiber_shift=l,
                         iterations=total, history=hist, regime=rep.regime)
    return _require_positive(sol)


# -- Theorem 1.2 regime: Rayleigh minimisation -------------------------------

def random_positive_pair(sys: SystemParams, grid: Grid, rng: np.random.Generator,
                         bumps: int = 3) -> tuple[Field, Field]:
    """Sums of Gaussian bumps near the origin, normalised to the target masses.

    Bump sizes follow the length scale lambda^{-1/2s} of the scalar profiles
    with coupling mu_i + beta (taking C0 = 1), so the later fiber projection
    moves the box only mildly.
    """
    P = sys.params
    ell = max(scaled_lambda(P, 1.0, a, mu + sys.beta) ** (-1 / (2 * P.s))
              for a, mu in ((sys.a1, sys.mu1), (sys.a2, sys.mu2)))

    def one(a):
        f = np.zeros(grid.shape)
        for _ in range(bumps):
            c = ell * rng.uniform(-1, 1, size=grid.N)
            w = ell * rng.uniform(0.5, 2.0)
            r2 = sum((x - cj) ** 2 for x, cj in zip(grid.coords, c))
            f = f + rng.uniform(0.5, 1.5) * np.exp(-r2 / w ** 2)
        return Field(grid, f * (a / math.sqrt(grid.cell * np.sum(f * f))))
    return one(sys.a1), one(sys.a2)


def _retract_kinetic(grid: Grid, U, V, sym, a1, a2, K0, iters: int = 50):
    """Find theta with K(F_theta u, F_theta v) = K0 after mass renormalisation,
    F_theta the multiplier exp(-theta |k|^{2s}).  Returns rescaled spectra."""
    wts = grid.plancherel
    pu = wts * (U.real ** 2 + U.imag ** 2)
    pv = wts * (V.real ** 2 + V.imag ** 2)
    theta = 0.0
    for _ in range(iters):
        e = np.exp(-2 * theta * sym)
        K = 0.0
        dK = 0.0
        for pw, a in ((pu, a1), (pv, a2)):
            m0 = np.sum(e * pw)
            m1 = np.sum(e * sym * pw) / m0
            m2 = np.sum(e * sym * sym * pw) / m0
            K += a * a * m1
            dK += -2 * a * a * (m2 - m1 * m1)
        if abs(K - K0) <= 1e-14 * K0 or dK == 0:
            break
        step = (K - K0) / dK
        # keep the filter exponent from running away
        lim = 0.5 / max(float(np.sqrt(np.sum(sym * pu) / np.sum(pu))), 1e-300)
        theta -= max(-lim, min(lim, step))
    F = np.exp(-theta * sym)
    Uf, Vf = U * F, V * F
    nu = math.sqrt(sp.spectral_quadratic(grid, Uf))
    nv = math.sqrt(sp.spectral_quadratic(grid, Vf))
    return Uf * (a1 / nu), Vf * (a2 / nv)


def _rayleigh_descent(grid: Grid, u, v, sys: SystemParams, opts: CoupledOpts,
                      K0: float | None = None):
    """Projected Sobolev-gradient descent of log R on the product of spheres.

    R is constant along the dilation orbit, so the joint kinetic integral is
    pinned at its initial value as a gauge.  This also keeps the iterate
    away from grid-scale spikes, along which the discrete R is unbounded
    below.  The gradient is preconditioned by (c+(-Delta)^s)^{-1} and
    projected, in that metric, off the mass and kinetic normals; each step
    is retracted back onto the constraint set by a spectral filter.
    """
    P = sys.params
    p, s = P.p, P.s
    al, sig = P.q / P.gap, P.sigma
    sym = grid.symbol(s)
    wts = grid.plancherel
    a1, a2 = sys.a1, sys.a2

    def dot(Ah, Bh):
        return float(np.sum(wts * (Ah.real * Bh.real + Ah.imag * Bh.imag)))

    def nonlinear(u, v):
        pu, pv = np.abs(u) ** p, np.abs(v) ** p
        return grid.cell * float(np.sum(sys.mu1 * pu * pu + 2 * sys.beta * pu * pv
                                        + sys.mu2 * pv * pv))

    U, V = sp.rfft(grid, u), sp.rfft(grid, v)
    U = U * (a1 / math.sqrt(sp.spectral_quadratic(grid, U)))
    V = V * (a2 / math.sqrt(sp.spectral_quadratic(grid, V)))
    if K0 is None:
        K0 = sp.spectral_quadratic(grid, U, sym) + sp.spectral_quadratic(grid, V, sym)
    else:
        U, V = _retract_kinetic(grid, U, V, sym, a1, a2, K0)
    u, v = sp.irfft(grid, U), sp.irfft(grid, V)
    c = opts.sobolev_shift if opts.sobolev_shift is not None else K0 / (a1 ** 2 + a2 ** 2)
    D = c + sym
    nl = nonlinear(u, v)
    f = al * math.log(K0) - sig * math.log(nl)
    tau = 1.0
    hist = []
    gn = math.inf
    for it in range(opts.descent_max_iter):
        nu, nv = _nonlinear_terms(u, v, sys)
        gu_h = 2 * al * sym * U / K0 - sp.rfft(grid, 2 * p * sig * nu / nl)
        gv_h = 2 * al * sym * V / K0 - sp.rfft(grid, 2 * p * sig * nv / nl)
        Gu_h, Gv_h = gu_h / D, gv_h / D
        zero = np.zeros_like(U)
        # constraint normals (L2) and their Riesz representers D^{-1} n
        raw = [(U, zero), (zero, V), (sym * U, sym * V)]
        rep = [(x / D, y / D) for x, y in raw]
        Gm = np.array([[dot(ri[0], bj[0]) + dot(ri[1], bj[1]) for bj in rep] for ri in raw])
        rhs = np.array([dot(ri[0], Gu_h) + dot(ri[1], Gv_h) for ri in raw])
        coef = np.linalg.lstsq(Gm, rhs, rcond=None)[0]
        for cf, (bu, bv) in zip(coef, rep):
            Gu_h = Gu_h - cf * bu
            Gv_h = Gv_h - cf * bv
        slope = -(dot(gu_h, Gu_h) + dot(gv_h, Gv_h))
        gn = math.sqrt(max(-slope, 0.0))
        hist.append({"iter": it, "rayleigh_log": f, "grad_norm": gn, "step": tau})
        if gn < opts.descent_tol:
            break
        for _ in range(opts.max_backtracks):
            Un, Vn = _retract_kinetic(grid, U - tau * Gu_h, V - tau * Gv_h, sym, a1, a2, K0)
            un, vn = sp.irfft(grid, Un), sp.irfft(grid, Vn)
            nln = nonlinear(un, vn)
            fn = al * math.log(K0) - sig * math.log(nln)
            if fn <= f + opts.armijo * tau * slope:
                break
            tau *= opts.backtrack
        else:
            err = NoConvergence(f"line search failed at descent step {it} "
                                f"(gradient norm {gn:.3e})")
            err.history = hist
            raise err
        u, v, U, V, nl, f = un, vn, Un, Vn, nln, fn
        tau = min(2.0 * tau, 1e3)
    else:
        err = NoConvergence(f"Rayleigh descent stalled at gradient norm {gn:.3e}")
        err.history = hist
        raise err
    return u, v, hist


def solve_min_rayleigh(sys: SystemParams, grid: Grid, opts: CoupledOpts | None = None,
                       initial: tuple[Field, Field] | None = None) -> CoupledSolution:
    """Minimise the Rayleigh quotient over the product of mass spheres.

    Descent globalises, on a coarsened copy of the grid when it is large;
    the minimiser is then carried to the full grid, put on F by the fiber
    dilation, polished by Newton there, and put on F once more.
    """
    opts = opts or CoupledOpts()
    rep = classify(sys)
    if rep.regime is not Regime.ABOVE_BETA2 and not opts.force:
        raise RegimeError(f"Rayleigh minimisation covers beta > beta2={rep.beta2:.6g}; "
                          f"got beta={sys.beta:.6g} ({rep.regime.value})")
    if initial is None:
        u0, v0 = random_positive_pair(sys, grid, np.random.default_rng(opts.seed))
    else:
        u0, v0 = initial
        sp.check_same_grid(u0, v0)
        grid = u0.grid
        u0 = Field(grid, u0.values * (sys.a1 / math.sqrt(sp.mass(u0))))
        v0 = Field(grid, v0.values * (sys.a2 / math.sqrt(sp.mass(v0))))
    # the first pass takes its kinetic gauge from the seed; the distance of the
    # result to F gives the kinetic level of its F-member, and later passes
    # descend at that level so the final projection barely moves the box
    fine = grid
    Mc = grid.M
    while Mc ** grid.N > opts.descent_max_points and Mc % 4 == 0:
        Mc //= 2
    grid = make_grid(fine.N, Mc, fine.L)
    u0, v0 = sp.spectral_resample(u0, grid), sp.spectral_resample(v0, grid)
    u, v, hist = _rayleigh_descent(grid, u0.values, v0.values, sys, opts)
    s = sys.params.s
    for _ in range(opts.regauge_passes):
        uf, vf = Field(grid, u), Field(grid, v)
        t = functionals(uf, vf, sys.params)
        l = fiber_param_from(t, sys)
        log.debug("rayleigh regauge: fiber shift %.3e", l)
        if abs(l) < opts.regauge_tol:
            break
        KF = t.kinetic * math.exp(2 * s * s * l)
        # carry the shape to that level by a resampled dilation; the filter
        # retraction only absorbs the interpolation error
        u = sp.spectral_resample(dilate(uf, l, s), grid).values
        v = sp.spectral_resample(dilate(vf, l, s), grid).values
        u, v, more = _rayleigh_descent(grid, u, v, sys, opts, K0=KF)
        hist = hist + more
    u = sp.spectral_resample(Field(grid, u), fine)
    v = sp.spectral_resample(Field(grid, v), fine)
    # translation gauge: put the peak of u+v at the origin
    u, v = sp.align_peak(u, v, ref=u + v)
    l1, u, v = project_to_F(u, v, sys)
    log.debug("projection to F before Newton: %.3e", l1)
    lam1, lam2 = extract_multipliers(u, v, sys)
    r = _newton(u.grid, u.values, v.values, lam1, lam2, sys, opts)
    u, v = Field(u.grid, r.u), Field(u.grid, r.v)
    l2, u, v = project_to_F(u, v, sys)
    log.debug("projection to F after Newton: %.3e", l2)
    sol = build_solution(u, v, sys, solver="min-rayleigh", fiber_shift=l1 + l2,
                         iterations=len(hist) + r.iterations,
                         history=[dict(h, phase="descent") for h in hist]
                         + [dict(h, phase="newton") for h in r.history],
                         regime=rep.regime)
    return _require_positive(sol)


def lemma44_bound(sys: SystemParams, C0: float, C1: float) -> float:
    """Closed-form maximum of E along the fiber of the pair
    (w_{a1,(C0/a1^2)^{p-1}}, w_{a2,(C0/a2^2)^{p-1}})."""
    P = sys.params
    a1, a2, p = sys.a1, sys.a2, P.p
    S = sys.mu1 * a1 ** (2 * p) + 2 * sys.beta * a1 ** p * a2 ** p + sys.mu2 * a2 ** (2 * p)
    return (P.gap / (4 * p * P.s) * C1 * C0 ** ((2 * p * P.s - P.q) / P.gap)
            * (a1 ** 2 + a2 ** 2) ** (P.q / P.gap) / S ** P.sigma)


def scalar_levels(sys: SystemParams, C0: float, C1: float) -> tuple[float, float]:
    """I_{mu_i}(w_{a_i,mu_i}) from the closed form."""
    P = sys.params
    return (closed_forms(P, C0, C1, sys.a1, sys.mu1).energy,
            closed_forms(P, C0, C1, sys.a2, sys.mu2).energy)


# -- minimax path diagnostics -----------------------------------------------

@dataclass(frozen=True)
class PathSurface:
    t1: np.ndarray
    t2: np.ndarray
    E: np.ndarray            # E[i, j] = E(t1[i]*w1, t2[j]*w2)
    ls: np.ndarray
    phi: tuple               # (phi_1(ls), phi_2(ls))
    phi_tilde: tuple         # (phi~_1(ls), phi~_2(ls))
    levels: tuple            # (I_{mu1}(w_{a1,mu1}), I_{mu2}(w_{a2,mu2}))

    @property
    def boundary_max(self) -> float:
        E = self.E
        return float(max(E[0].max(), E[-1].max(), E[:, 0].max(), E[:, -1].max()))

    @property
    def interior_max(self) -> float:
        return float(self.E.max())


def _cross_table(gs: ScalarGroundState, p: float, r_min: float, n: int = 129):
    """J(r) = int w0(y)^p w0(r y)^p dy for r in [r_min, 1], spline in log r."""
    g = gs.grid
    prof_r = g.axis[g.M // 2:]
    # profile along the last axis through the origin
    prof = CubicSpline(prof_r, gs.w0.values[(g.M // 2,) * (g.N - 1) + (slice(g.M // 2, None),)])
    rad = g.radius
    w0p = np.abs(gs.w0.values) ** p
    rmax = prof_r[-1]
    rs = np.exp(np.linspace(math.log(r_min), 0.0, n)) if r_min < 1 else np.array([1.0])
    J = []
    for r in rs:
        y = r * rad
        vals = np.where(y <= rmax, np.abs(prof(np.minimum(y, rmax))), 0.0)
        J.append(g.cell * float(np.sum(w0p * vals ** p)))
    J = np.array(J)
    if len(rs) == 1:
        return lambda r: np.full_like(np.asarray(r, dtype=float), J[0])
    spl = CubicSpline(np.log(rs), J)
    return lambda r: spl(np.log(r))


def path_energy_surface(sys: SystemParams, gs: ScalarGroundState, box, resolution: int = 41,
                        ls=None) -> PathSurface:
    """E over gamma0(t1,t2) = (t1*w1, t2*w2) with w_i = w_{a_i, mu_i+beta}.

    Self terms come from the closed-form scaling laws; the cross term
    int |t1*w1|^p |t2*w2|^p reduces to a one-parameter integral of w0.
    """
    P = sys.params
    s, p, N, q = P.s, P.p, P.N, P.q
    rho1, R1, rho2, R2 = (float(b) for b in box)
    t1 = np.linspace(rho1, R1, resolution)
    t2 = np.linspace(rho2, R2, resolution)
    C0, C1 = gs.C0, gs.C1
    comps = []
    for a, mu in ((sys.a1, sys.mu1), (sys.a2, sys.mu2)):
        cf = closed_forms(P, C0, C1, a, mu + sys.beta)
        comps.append((cf.kinetic, cf.nonlinear, scaled_amplitude(P, C0, a, mu + sys.beta),
                      scaled_lambda(P, C0, a, mu + sys.beta) ** (1 / (2 * s)), mu))
    (K1, N1, A1, c1, m1), (K2, N2, A2, c2, m2) = comps
    T1, T2 = np.meshgrid(t1, t2, indexing="ij")
    C1g = c1 * np.exp(s * T1)
    C2g = c2 * np.exp(s * T2)
    ratio = C2g / C1g
    rr = np.minimum(ratio, 1 / ratio)
    J = _cross_table(gs, p, float(rr.min()))
    Jr = np.where(ratio <= 1, J(rr), ratio ** -N * J(rr))
    cross = (np.exp(N * s * p * (T1 + T2) / 2) * A1 ** p * A2 ** p * C1g ** -N * Jr)
    E = (0.5 * (np.exp(2 * s * s * T1) * K1 + np.exp(2 * s * s * T2) * K2)
         - (m1 * np.exp(q * s * T1) * N1 + m2 * np.exp(q * s * T2) * N2
            + 2 * sys.beta * cross) / (2 * p))
    if ls is None:
        ls = np.linspace(min(rho1, rho2), max(R1, R2), 201)
    ls = np.asarray(ls, dtype=float)
    phi, phit = [], []
    for K, Nn, _, _, mu in comps:
        phi.append(0.5 * np.exp(2 * s * s * ls) * K - mu / (2 * p) * np.exp(q * s * ls) * Nn)
        phit.append(s * s * np.exp(2 * s * s * ls) * K
                    - q * s / (2 * p) * (mu + sys.beta) * np.exp(q * s * ls) * Nn)
    return PathSurface(t1, t2, E, ls, tuple(phi), tuple(phit), scalar_levels(sys, C0, C1))
