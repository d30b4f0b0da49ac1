"""Command-line front end.

    fracnorm <command> --config run.yaml [--out DIR] [--seed N] [--force]

Exit codes: 0 success, 1 invalid input, 2 solver failure (or failed
verification), 3 file problems.  The output directory is, in order of
precedence, ``--out``, ``$FRACNORM_OUT``, the config's ``out``; each command
writes into its own subdirectory.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts as art
from . import spectral as sp
from .config import OUT_ENV, RunConfig, load_config
from .coupled import (CoupledSolution, el_residual, energy,
                      extract_multipliers, lemma44_bound, path_energy_surface,
                      scalar_levels, solve_continuation, solve_min_rayleigh,
                      symmetric_oracle_on_grid)
from .errors import ArtifactError, FracNormError, RegimeError, SolverError, ValidationError
from .fiber import functionals, rayleigh_from, system_G_from
from .params import ProblemParams, SystemParams
from .scalar import (closed_forms, copt_closed_form, pohozaev_ratio, scaled_solution,
                     solve_w0)
from .thresholds import Regime, classify, sweep as threshold_sweep

log = logging.getLogger("fracnorm")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _outdir(cfg: RunConfig, command: str) -> Path:
    d = Path(cfg.out) / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _ground_state(cfg: RunConfig):
    gs = solve_w0(cfg.problem, cfg.grid, cfg.scalar)
    log.info("ground state: C0=%.17g C1=%.17g (%d iterations)", gs.C0, gs.C1, gs.iterations)
    return gs


# -- commands -------------------------------------------------------------------

def cmd_solve_scalar(cfg: RunConfig) -> int:
    """Solve the ground state and the scaled family."""
    out = _outdir(cfg, "solve-scalar")
    gs = _ground_state(cfg)
    art.save_ground_state(out, gs)
    rows = []
    for a, mu in cfg.scaled:
        sol = scaled_solution(a, mu, gs, tail_tol=cfg.scalar.tail_tol)
        stem = out / f"w_a{a:g}_mu{mu:g}"
        art.save_field(stem, sol.w, s=cfg.problem.s, a=a, mu=mu, lam=sol.lam)
        cf = sol.closed_forms
        rows.append({"a": a, "mu": mu, "lambda": sol.lam, "kinetic": cf.kinetic,
                     "nonlinear": cf.nonlinear, "energy": cf.energy})
    if rows:
        art.write_csv(out / "scaled.csv", rows)
    print(f"C0={gs.C0!r} C1={gs.C1!r} Copt={gs.Copt!r}")
    print(f"pde_residual={gs.residual_pde:.3e} pohozaev_residual={gs.residual_pohozaev:.3e} "
          f"iterations={gs.iterations}")
    return EXIT_OK


def cmd_constants(cfg: RunConfig) -> int:
    """Report C0, C1 and the optimal GNS constant."""
    out = _outdir(cfg, "constants")
    gs = _ground_state(cfg)
    P = cfg.problem
    data = {"params": {"N": P.N, "s": P.s, "p": P.p}, "grid": cfg.grid.header(),
            "C0": gs.C0, "C1": gs.C1, "Copt": gs.Copt,
            "Copt_closed_form": copt_closed_form(P, gs.C0, gs.C1),
            "pohozaev_ratio": pohozaev_ratio(gs),
            "residual_pde": gs.residual_pde, "residual_pohozaev": gs.residual_pohozaev}
    art.write_json(out / "constants.json", data)
    rows = []
    for a, mu in cfg.scaled:
        cf = closed_forms(P, gs.C0, gs.C1, a, mu)
        rows.append({"a": a, "mu": mu, "kinetic": cf.kinetic, "nonlinear": cf.nonlinear,
                     "energy": cf.energy})
    if rows:
        art.write_csv(out / "closed_forms.csv", rows)
    print(f"C0={gs.C0!r} C1={gs.C1!r} Copt={gs.Copt!r}")
    return EXIT_OK


def _betas(cfg: RunConfig) -> np.ndarray:
    sw = cfg.sweep
    return np.linspace(sw.beta_min, sw.beta_max, sw.samples)


def cmd_thresholds(cfg: RunConfig) -> int:
    """Compute beta1, beta2 and the regime."""
    out = _outdir(cfg, "thresholds")
    sys_ = cfg.require_system()
    rep = classify(sys_)
    art.write_json(out / "thresholds.json", rep.to_dict())
    rows = [r.to_dict() for r in threshold_sweep(sys_, _betas(cfg))]
    art.write_csv(out / "sweep.csv", rows)
    b2 = "none" if math.isnan(rep.beta2) else repr(rep.beta2)
    print(f"beta1={rep.beta1!r} beta2={b2} regime={rep.regime.value}")
    return EXIT_OK


def _solve(sys_: SystemParams, cfg: RunConfig) -> CoupledSolution:
    rep = classify(sys_)
    opts = cfg.coupled
    solver = cfg.solver
    if solver == "auto":
        if rep.regime is Regime.BELOW_BETA1:
            solver = "continuation"
        elif rep.regime is Regime.ABOVE_BETA2:
            solver = "rayleigh"
        elif not opts.force:
            raise RegimeError(f"beta={sys_.beta!r} lies in regime {rep.regime.value}, "
                              "which no solver covers; pass --force to attempt anyway")
        else:
            # no contract here: try the minimiser first, then continuation
            try:
                return solve_min_rayleigh(sys_, cfg.grid, opts)
            except SolverError as exc:
                log.warning("Rayleigh minimisation failed (%s); trying continuation", exc)
                return solve_continuation(sys_, cfg.grid, opts)
    if solver == "continuation":
        return solve_continuation(sys_, cfg.grid, opts)
    return solve_min_rayleigh(sys_, cfg.grid, opts)


def _comparisons(sol: CoupledSolution, cfg: RunConfig, gs) -> dict:
    S = sol.sys
    lv = scalar_levels(S, gs.C0, gs.C1)
    out = {"C0": gs.C0, "C1": gs.C1, "scalar_levels": list(lv),
           "fiber_max_bound": lemma44_bound(S, gs.C0, gs.C1)}
    if sol.regime is Regime.ABOVE_BETA2:
        out["below_scalar_levels"] = sol.energy < min(lv)
        out["below_fiber_max_bound"] = sol.energy < out["fiber_max_bound"]
    elif sol.regime is Regime.BELOW_BETA1:
        out["above_scalar_levels"] = sol.energy > max(lv)
    if S.symmetric:
        orc = symmetric_oracle_on_grid(S.params, S.a1, S.mu1, S.beta, sol.grid, cfg.scalar)
        u, v = sp.align_peak(sol.u, sol.v)
        out["oracle"] = {
            "max_diff_u": float(np.max(np.abs(u.values - orc.u.values))),
            "max_diff_v": float(np.max(np.abs(v.values - orc.v.values))),
            "lambda": orc.lambda1, "energy": orc.energy}
    return out


def cmd_solve_system(cfg: RunConfig) -> int:
    """Solve the coupled system in its regime."""
    out = _outdir(cfg, "solve-system")
    sol = _solve(cfg.require_system(), cfg)
    art.save_solution(out, sol)
    gs = _ground_state(cfg)
    art.write_json(out / "comparisons.json", _comparisons(sol, cfg, gs))
    art.write_csv(out / "history.csv", sol.history,
                  fieldnames=sorted({k for h in sol.history for k in h}))
    print(f"solver={sol.solver} regime={sol.regime.value} energy={sol.energy!r} "
          f"lambda1={sol.lambda1!r} lambda2={sol.lambda2!r}")
    print(f"G_defect={sol.G_defect:.3e} el_residual={sol.el_residual:.3e}")
    failed = [k for k, ok in sol.checks().items() if not ok]
    if failed:
        print(f"warning: invariants not met: {', '.join(failed)}", file=sys.stderr)
    return EXIT_OK


def cmd_paths(cfg: RunConfig) -> int:
    """Energy over the two-parameter fiber surface."""
    out = _outdir(cfg, "paths")
    sys_ = cfg.require_system()
    rep = classify(sys_)
    if rep.regime is not Regime.BELOW_BETA1 and not cfg.force:
        raise RegimeError(f"path diagnostics cover beta < beta1={rep.beta1!r}; "
                          f"got beta={sys_.beta!r}")
    gs = _ground_state(cfg)
    ps = path_energy_surface(sys_, gs, cfg.paths.box, cfg.paths.resolution)
    rows = [{"t1": a, "t2": b, "E": ps.E[i, j]}
            for i, a in enumerate(ps.t1) for j, b in enumerate(ps.t2)]
    art.write_csv(out / "surface.csv", rows)
    art.write_csv(out / "curves.csv", [
        {"l": l, "phi1": ps.phi[0][k], "phi2": ps.phi[1][k],
         "phi_tilde1": ps.phi_tilde[0][k], "phi_tilde2": ps.phi_tilde[1][k]}
        for k, l in enumerate(ps.ls)])
    signs = []
    for pt in ps.phi_tilde:
        signs.append(bool(np.all(pt[ps.ls < 0] > 0) and np.all(pt[ps.ls > 0] < 0)))
    top = max(ps.levels)
    data = {"levels": list(ps.levels), "boundary_max": ps.boundary_max,
            "interior_max": ps.interior_max, "epsilon": cfg.paths.epsilon,
            "boundary_below_levels": ps.boundary_max <= top + cfg.paths.epsilon,
            "interior_above_levels": ps.interior_max > top,
            "phi_tilde_sign_pattern": signs}
    art.write_json(out / "paths.json", data)
    print(f"boundary_max={ps.boundary_max!r} interior_max={ps.interior_max!r} levels={list(ps.levels)}")
    return EXIT_OK


def verify_solution(summary: dict, u, v, C0=None, C1=None) -> list[dict]:
    """Re-derive every invariant of a stored solution from its fields."""
    pr, sy = summary["params"], summary["system"]
    P = ProblemParams(int(pr["N"]), float(pr["s"]), float(pr["p"]), strict=False)
    S = SystemParams(P, sy["mu1"], sy["mu2"], sy["beta"], sy["a1"], sy["a2"])
    lam1, lam2 = summary["lambda1"], summary["lambda2"]
    t = functionals(u, v, P)
    E = energy(u, v, S)
    checks = []

    def add(name, value, bound, ok):
        checks.append({"check": name, "value": value, "bound": bound, "passed": bool(ok)})

    m1 = abs(sp.mass(u) - S.a1 ** 2) / S.a1 ** 2
    m2 = abs(sp.mass(v) - S.a2 ** 2) / S.a2 ** 2
    add("mass", max(m1, m2), 1e-8, max(m1, m2) < 1e-8)
    G = abs(system_G_from(t, S)) / t.kinetic
    add("G_defect", G, 1e-8, G < 1e-8)
    el = el_residual(u, v, S, lam1, lam2)
    add("el_residual", el, 1e-6, el < 1e-6)
    e1, e2 = extract_multipliers(u, v, S)
    dl = max(abs(e1 - lam1), abs(e2 - lam2)) / max(abs(lam1), abs(lam2))
    add("multipliers_reproduced", dl, 1e-10, dl < 1e-10)
    add("lambda_positive", min(lam1, lam2), 0.0, lam1 > 0 and lam2 > 0)
    mn = min(float(u.values.min()), float(v.values.min()))
    add("positive", mn, -1e-14, mn > -1e-14)
    dE = abs(E - summary["energy"]) / abs(E)
    add("energy_reproduced", dE, 1e-12, dE < 1e-12)
    R = rayleigh_from(t.kinetic, t.nonlinear(S), P)
    add("energy_equals_rayleigh", abs(E - R) / abs(E), 1e-8, abs(E - R) / abs(E) < 1e-8)
    ident = P.gap / (2 * P.q) * t.kinetic
    add("energy_kinetic_identity", abs(E - ident) / abs(E), 1e-8, abs(E - ident) / abs(E) < 1e-8)
    if C0 is not None:
        lv = scalar_levels(S, C0, C1)
        regime = summary.get("regime")
        if regime == Regime.ABOVE_BETA2.value:
            add("below_scalar_levels", E - min(lv), 0.0, E < min(lv))
            bnd = lemma44_bound(S, C0, C1)
            add("below_fiber_max_bound", E - bnd, 0.0, E < bnd)
        elif regime == Regime.BELOW_BETA1.value:
            add("above_scalar_levels", E - max(lv), 0.0, E > max(lv))
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    """Re-check every invariant of stored artifacts."""
    src = cfg.verify_dir or (Path(cfg.out) / "solve-system")
    summary, u, v = art.load_solution(src)
    comp = src / "comparisons.json"
    C0 = C1 = None
    if comp.exists():
        c = art.read_json(comp)
        C0, C1 = c["C0"], c["C1"]
    checks = verify_solution(summary, u, v, C0, C1)
    out = _outdir(cfg, "verify")
    art.write_csv(out / "checks.csv", checks, fieldnames=["check", "value", "bound", "passed"])
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['check']}: {c['value']:.3e}")
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_SOLVER


def _sweep_point(cfg: RunConfig, beta: float, out: Path, index: int) -> dict:
    sys_ = cfg.require_system().with_beta(float(beta))
    rep = classify(sys_)
    row = {"beta": beta, "regime": rep.regime.value, "energy": math.nan,
           "lambda1": math.nan, "lambda2": math.nan, "G_defect": math.nan,
           "el_residual": math.nan, "status": "classified"}
    if cfg.sweep.solve:
        try:
            sol = _solve(sys_, cfg)
            row.update(energy=sol.energy, lambda1=sol.lambda1, lambda2=sol.lambda2,
                       G_defect=sol.G_defect, el_residual=sol.el_residual, status="ok")
        except FracNormError as exc:
            row["status"] = type(exc).__name__
    art.write_json(out / f"point_{index:04d}.json", row)
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    """Classify (and optionally solve) along a beta sweep."""
    out = _outdir(cfg, "sweep")
    betas = _betas(cfg)
    with ThreadPoolExecutor(max_workers=cfg.sweep.workers) as pool:
        rows = list(pool.map(lambda ib: _sweep_point(cfg, ib[1], out, ib[0]),
                             enumerate(betas)))
    art.write_csv(out / "sweep.csv", rows)
    print(f"{len(rows)} sweep points written to {out / 'sweep.csv'}")
    return EXIT_OK


COMMANDS = {
    "solve-scalar": cmd_solve_scalar,
    "constants": cmd_constants,
    "thresholds": cmd_thresholds,
    "solve-system": cmd_solve_system,
    "paths": cmd_paths,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracnorm",
                                 description="Normalized solutions of coupled fractional "
                                             "Schroedinger systems on a periodic grid.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp_ = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp_.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        sp_.add_argument("--out", type=Path, help=f"output directory (overrides ${OUT_ENV})")
        sp_.add_argument("--seed", type=int, help="random seed for the Rayleigh descent")
        sp_.add_argument("--force", action="store_true",
                         help="run solvers outside the regime they cover")
        sp_.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = args.out or os.environ.get(OUT_ENV) or None
        cfg = cfg.with_overrides(out=out, seed=args.seed, force=args.force)
        return COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ArtifactError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
