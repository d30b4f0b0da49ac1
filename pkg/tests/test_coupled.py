import numpy as np
import pytest

from fracnorm import spectral as sp
from fracnorm.coupled import (CoupledOpts, el_gradient, el_residual, energy, extract_multipliers,
                              lemma44_bound, path_energy_surface, random_positive_pair,
                              scalar_levels, solve_continuation, solve_min_rayleigh,
                              symmetric_oracle)
from fracnorm.errors import GridMismatch, RegimeError, ZeroField
from fracnorm.fiber import dilate, functionals, rayleigh
from fracnorm.params import SystemParams
from fracnorm.scalar import (closed_forms, scaled_lambda, scaled_solution,
                             scaled_solution_on_grid, scalar_energy)
from fracnorm.spectral import Field, make_grid
from fracnorm.thresholds import Regime, classify

from oracles import rel

SOLUTIONS = ["sol_sym_cont", "sol_sym_ray", "sol_asym_ray", "sol_asym_cont"]


# -- energy and residual fields ------------------------------------------------------

def test_energy_trivial_cases(P, rng):
    g = make_grid(1, 256, 20.0)
    z = Field.zeros(g)
    sys0 = SystemParams(P, 1.3, 0.7, 0.0, 1.0, 1.0)
    assert energy(z, z, sys0) == 0.0
    u, v = (Field(g, rng.standard_normal(g.shape)) for _ in range(2))
    split = scalar_energy(u, 1.3, P.s, P.p) + scalar_energy(v, 0.7, P.s, P.p)
    assert energy(u, v, sys0) == pytest.approx(split, rel=1e-13)
    with pytest.raises(GridMismatch):
        energy(u, Field.zeros(make_grid(1, 256, 21.0)), sys0)


def test_energy_of_symmetric_pair(gs_big, P):
    sys_ = SystemParams(P, 1.0, 1.0, 0.3, 1.2, 1.2)
    w = scaled_solution(1.2, 1.3, gs_big, tail_tol=None).w
    expected = 2 * closed_forms(P, gs_big.C0, gs_big.C1, 1.2, 1.3).energy
    assert rel(energy(w, w, sys_), expected) < 1e-6


def test_symmetric_oracle_residuals(gs_small, P):
    for beta in (0.0, 0.4, 3.0):
        sol = symmetric_oracle(1.1, 0.9, beta, gs_small)
        ru, rv = el_gradient(sol.u, sol.v, sol.sys, sol.lambda1, sol.lambda2)
        assert sp.l2_norm(ru) < 1e-8 * sp.l2_norm(sol.u)
        assert sp.l2_norm(rv) < 1e-8 * sp.l2_norm(sol.v)
        assert sol.lambda1 == sol.lambda2 == pytest.approx(
            scaled_lambda(P, gs_small.C0, 1.1, 0.9 + beta), rel=1e-14)


def test_symmetric_oracle_identities(gs_big, P):
    sol = symmetric_oracle(1.0, 1.0, 0.5, gs_big)
    assert rel(sol.energy, 2 * closed_forms(P, gs_big.C0, gs_big.C1, 1.0, 1.5).energy) < 1e-6
    assert sol.G_defect < 1e-6
    assert sol.el_residual < 1e-8
    beta0 = symmetric_oracle(1.0, 1.0, 0.0, gs_big)
    np.testing.assert_array_equal(beta0.u.values, beta0.v.values)


def test_semitrivial_pair_has_zero_residual(gs_small, P):
    ss = scaled_solution(0.9, 1.4, gs_small, tail_tol=None)
    sys_ = SystemParams(P, 1.4, 2.0, 5.0, 0.9, 1.0)
    z = Field.zeros(ss.w.grid)
    ru, rv = el_gradient(ss.w, z, sys_, ss.lam, 7.0)
    assert sp.l2_norm(ru) < 1e-8 * sp.l2_norm(ss.w)
    assert np.all(rv.values == 0.0)


def test_random_pair_has_order_one_residual(P, rng):
    g = make_grid(1, 512, 60.0)
    sys_ = SystemParams(P, 1.0, 2.0, 0.5, 1.0, 1.2)
    u, v = random_positive_pair(sys_, g, rng)
    assert el_residual(u, v, sys_, 1.0, 1.0) > 1e-2


# -- multipliers ------------------------------------------------------------------------

def test_multipliers_of_uncoupled_pair(gs_small, P):
    ss = scaled_solution(1.1, 0.8, gs_small, tail_tol=None)
    sys_ = SystemParams(P, 0.8, 0.8, 0.0, 1.1, 1.1)
    l1, l2 = extract_multipliers(ss.w, ss.w, sys_)
    assert rel(l1, ss.lam) < 1e-8 and rel(l2, ss.lam) < 1e-8


def test_multipliers_of_symmetric_oracle(gs_small):
    sol = symmetric_oracle(1.0, 1.0, 0.7, gs_small)
    l1, l2 = extract_multipliers(sol.u, sol.v, sol.sys)
    assert rel(l1, sol.lambda1) < 1e-6 and rel(l2, sol.lambda2) < 1e-6


def test_multiplier_sign_flips_when_kinetic_dominates(gs_small, P):
    # kinetic scales by e^{2s^2 l}, the nonlinear terms by e^{(p-1)Nsl}; 2s^2 < (p-1)Ns
    w = scaled_solution(1.0, 1.0, gs_small, tail_tol=None).w
    sys_ = SystemParams(P, 1.0, 1.0, 0.0, 1.0, 1.0)
    spread = dilate(w, -20.0, P.s)
    assert extract_multipliers(spread, spread, sys_)[0] < 0
    assert extract_multipliers(w, w, sys_)[0] > 0


def test_multipliers_need_both_components(P):
    g = make_grid(1, 64, 10.0)
    u = Field.from_function(g, lambda x: np.exp(-x ** 2))
    with pytest.raises(ZeroField):
        extract_multipliers(u, Field.zeros(g), SystemParams(P, 1, 1, 1, 1, 1))


# -- solvers ------------------------------------------------------------------------------

def test_continuation_at_zero_coupling_is_the_uncoupled_pair(asym_base, quiet):
    g = make_grid(1, 1 << 14, 960.0)
    sol = solve_continuation(asym_base, g, CoupledOpts(scalar=quiet))
    P = asym_base.params
    for a, mu, f, lam in ((1.0, 1.0, sol.u, sol.lambda1), (1.2, 2.0, sol.v, sol.lambda2)):
        gs, ss = scaled_solution_on_grid(P, a, mu, g, quiet)
        np.testing.assert_array_equal(f.values, ss.w.values)
        assert rel(lam, scaled_lambda(P, gs.C0, a, mu)) < 1e-8
    assert sol.iterations == 0


def test_solver_regime_guards(asym_base, quiet):
    rep = classify(asym_base)
    g = make_grid(1, 1024, 100.0)
    with pytest.raises(RegimeError):
        solve_continuation(asym_base.with_beta(1.1 * rep.beta1), g, CoupledOpts(scalar=quiet))
    with pytest.raises(RegimeError):
        solve_min_rayleigh(asym_base.with_beta(0.9 * rep.beta2), g, CoupledOpts(scalar=quiet))


def test_rayleigh_solve_is_deterministic(sym_large_beta, quiet):
    g = make_grid(1, 1 << 12, 400.0)
    opts = CoupledOpts(scalar=quiet, seed=5, newton_tol=1e-8)
    a = solve_min_rayleigh(sym_large_beta, g, opts)
    b = solve_min_rayleigh(sym_large_beta, g, opts)
    np.testing.assert_array_equal(a.u.values, b.u.values)
    np.testing.assert_array_equal(a.v.values, b.v.values)
    assert a.history == b.history


@pytest.mark.parametrize("name", [
    *SOLUTIONS[:3],
    pytest.param("sol_asym_cont", marks=pytest.mark.xfail(
        strict=True, reason="components differ in width ~11x; the joint residual "
                            "stalls near 2e-5 at the largest grid that fits in memory")),
])
def test_solution_invariants(name, request):
    sol = request.getfixturevalue(name)
    checks = sol.checks()
    assert checks == {k: True for k in checks}, (checks, sol.el_residual)


@pytest.mark.parametrize("name", SOLUTIONS)
def test_energy_identity_on_F(name, request):
    sol = request.getfixturevalue(name)
    P = sol.sys.params
    K = functionals(sol.u, sol.v, P).kinetic
    assert rel(sol.energy, P.gap / (2 * P.q) * K) < 1e-8
    assert rel(sol.rayleigh, sol.energy) < 1e-8


@pytest.mark.parametrize("name", ["sol_sym_ray", "sol_asym_ray"])
def test_rayleigh_lower_bound(name, request, rng):
    sol = request.getfixturevalue(name)
    for _ in range(100):
        u, v = random_positive_pair(sol.sys, sol.grid, rng, bumps=int(rng.integers(1, 5)))
        assert rayleigh(u, v, sol.sys) >= sol.energy - 1e-6


@pytest.mark.parametrize("name", ["sol_sym_ray", "sol_asym_ray"])
def test_minimiser_below_semitrivial_levels(name, request, gs_big):
    sol = request.getfixturevalue(name)
    assert sol.regime is Regime.ABOVE_BETA2
    assert sol.energy < min(scalar_levels(sol.sys, gs_big.C0, gs_big.C1))
    assert sol.energy <= lemma44_bound(sol.sys, gs_big.C0, gs_big.C1) + 1e-6


@pytest.mark.parametrize("name", ["sol_sym_cont", "sol_asym_cont"])
def test_continuation_above_scalar_levels(name, request, gs_big):
    sol = request.getfixturevalue(name)
    assert sol.regime is Regime.BELOW_BETA1
    assert sol.energy > max(scalar_levels(sol.sys, gs_big.C0, gs_big.C1)) - 1e-8


def test_lemma44_bound_symmetric_value(gs_small, P):
    # a1=a2=a, mu1=mu2=mu: the bound is 2 I_{mu+beta}(w_{a,mu+beta})
    S = SystemParams(P, 1.3, 1.3, 0.6, 0.9, 0.9)
    cf = closed_forms(P, gs_small.C0, gs_small.C1, 0.9, 1.9)
    assert rel(lemma44_bound(S, gs_small.C0, gs_small.C1), 2 * cf.energy) < 1e-12


# -- path diagnostics ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def surface(asym_small_beta, gs_big):
    return path_energy_surface(asym_small_beta, gs_big, (-30, 30, -30, 30), resolution=61)


def test_path_derivative_sign_pattern(surface):
    ls = surface.ls
    for pt in surface.phi_tilde:
        assert abs(np.interp(0.0, ls, pt)) < 1e-10 * np.max(np.abs(pt))
        assert np.all(pt[ls < -1e-9] > 0) and np.all(pt[ls > 1e-9] < 0)


def test_path_boundary_and_interior(surface):
    top = max(surface.levels)
    assert surface.boundary_max <= top
    assert surface.interior_max > top


def test_path_cross_term_matches_quadrature(asym_small_beta, gs_big, quiet):
    # on the diagonal t1 = t2 both dilations share a box, so no interpolation enters;
    # the direct grid holds the wide component in ~350 widths, which limits it to ~1e-5
    S = asym_small_beta
    P = S.params
    surf = path_energy_surface(S, gs_big, (-0.6, 0.6, -0.6, 0.6), resolution=5)
    g = make_grid(1, 1 << 18, 3840.0)
    _, w1 = scaled_solution_on_grid(P, S.a1, S.mu1 + S.beta, g, quiet)
    _, w2 = scaled_solution_on_grid(P, S.a2, S.mu2 + S.beta, g, quiet)
    for i, t in enumerate(surf.t1):
        E = energy(dilate(w1.w, t, P.s), dilate(w2.w, t, P.s), S)
        assert rel(surf.E[i, i], E) < 1e-5
