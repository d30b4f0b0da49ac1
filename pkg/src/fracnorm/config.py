"""Run configuration: one YAML file, strict schema, unknown keys rejected.

Layout (every section except ``problem`` and ``grid`` is optional)::

    problem: {N: 1, s: 0.45, p: 2.5}
    system:  {mu1: 1.0, mu2: 2.0, beta: 0.1, a1: 1.0, a2: 1.2}
    grid:    {M: 2048, L: 60.0}
    scalar:  {tol: 1.0e-8, max_iter: 10000, tail_tol: null, ...}   # SolverOpts
    coupled: {newton_tol: 1.0e-10, descent_tol: 1.0e-4, ...}       # CoupledOpts
    scaled:  [{a: 1.0, mu: 1.0}]      # solve-scalar: members of the scaled family
    solver:  auto                     # solve-system: auto | continuation | rayleigh
    sweep:   {beta_min: 0.0, beta_max: 2.0, samples: 21, workers: 1, solve: false}
    paths:   {box: [-20, 20, -20, 20], resolution: 41, epsilon: 1.0e-6}
    verify:  {artifacts: results/solve-system}
    seed: 0
    out: results
    force: false
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .coupled import CoupledOpts
from .errors import ArtifactError, ValidationError
from .params import ProblemParams, SystemParams
from .scalar import SolverOpts
from .spectral import Grid, make_grid

OUT_ENV = "FRACNORM_OUT"
SOLVERS = ("auto", "continuation", "rayleigh")


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    beta_min: float = 0.0
    beta_max: float = 1.0
    samples: int = 11
    workers: int = 1
    solve: bool = False      # also solve the system at each point

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError(f"sweep.samples must be >= 1, got {self.samples}")
        if self.workers < 1:
            raise ConfigError(f"sweep.workers must be >= 1, got {self.workers}")
        if not 0 <= self.beta_min <= self.beta_max:
            raise ConfigError("sweep needs 0 <= beta_min <= beta_max")


@dataclass(frozen=True)
class PathSpec:
    box: tuple = (-20.0, 20.0, -20.0, 20.0)
    resolution: int = 41
    epsilon: float = 1e-6

    def __post_init__(self):
        if len(self.box) != 4:
            raise ConfigError("paths.box needs four numbers (rho1, R1, rho2, R2)")
        r1, R1, r2, R2 = self.box
        if not (r1 < R1 and r2 < R2):
            raise ConfigError("paths.box endpoints must satisfy rho < R")
        if self.resolution < 3:
            raise ConfigError("paths.resolution must be at least 3")


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemParams
    grid: Grid
    system: SystemParams | None = None
    scalar: SolverOpts = field(default_factory=SolverOpts)
    coupled: CoupledOpts = field(default_factory=CoupledOpts)
    scaled: tuple = ()                 # ((a, mu), ...)
    solver: str = "auto"
    sweep: SweepSpec = field(default_factory=SweepSpec)
    paths: PathSpec = field(default_factory=PathSpec)
    verify_dir: Path | None = None
    seed: int = 0
    out: Path = Path("results")
    force: bool = False
    source: Path | None = None

    def require_system(self) -> SystemParams:
        if self.system is None:
            raise ConfigError("this command needs a 'system' section")
        return self.system

    def with_overrides(self, out=None, seed=None, force=None) -> "RunConfig":
        kw = {}
        if out is not None:
            kw["out"] = Path(out)
        if seed is not None:
            kw["seed"] = int(seed)
        if force:
            kw["force"] = True
        cfg = dataclasses.replace(self, **kw)
        return dataclasses.replace(cfg, coupled=dataclasses.replace(
            cfg.coupled, seed=cfg.seed, force=cfg.force, scalar=cfg.scalar))


def _section(data, name: str, allowed, required=()) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(map(str, unknown))}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"missing key(s) in '{name}': {', '.join(missing)}")
    return data


def _coerce(value, default, key: str):
    # YAML 1.1 reads "1e-8" (no dot) as a string
    if value is None or isinstance(default, bool):
        return value
    if isinstance(default, int):
        f = float(value)
        if f != int(f):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(f)
    if isinstance(default, float) or default is None:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {value!r}") from None
    return value


def _opts(cls, data, name: str, skip=()):
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    sec = _section(data, name, fields)
    return cls(**{k: _coerce(v, fields[k].default, f"{name}.{k}") for k, v in sec.items()})


TOP = ("problem", "system", "grid", "scalar", "coupled", "scaled", "solver",
       "sweep", "paths", "verify", "seed", "out", "force")


def parse_config(data: dict, source: Path | None = None) -> RunConfig:
    data = _section(data, "<top level>", TOP, required=("problem", "grid"))
    try:
        pr = _section(data["problem"], "problem", ("N", "s", "p"), ("N", "s", "p"))
        problem = ProblemParams(int(pr["N"]), float(pr["s"]), float(pr["p"]))
        gr = _section(data["grid"], "grid", ("M", "L"), ("M", "L"))
        grid = make_grid(problem.N, int(gr["M"]), float(gr["L"]))
        system = None
        if data.get("system") is not None:
            keys = ("mu1", "mu2", "beta", "a1", "a2")
            sy = _section(data["system"], "system", keys, keys)
            system = SystemParams(problem, *(float(sy[k]) for k in keys))
        scalar = _opts(SolverOpts, data.get("scalar"), "scalar")
        coupled = _opts(CoupledOpts, data.get("coupled"), "coupled",
                        skip=("scalar", "seed", "force"))
        scaled = []
        for i, item in enumerate(data.get("scaled") or ()):
            it = _section(item, f"scaled[{i}]", ("a", "mu"), ("a", "mu"))
            a, mu = float(it["a"]), float(it["mu"])
            if not (a > 0 and mu > 0):
                raise ConfigError(f"scaled[{i}] needs a > 0 and mu > 0")
            scaled.append((a, mu))
        solver = str(data.get("solver", "auto"))
        if solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {solver!r}")
        sweep = _opts(SweepSpec, data.get("sweep"), "sweep")
        pa = dict(_section(data.get("paths"), "paths", ("box", "resolution", "epsilon")))
        if "box" in pa:
            pa["box"] = tuple(float(b) for b in pa["box"])
        if "resolution" in pa:
            pa["resolution"] = _coerce(pa["resolution"], 0, "paths.resolution")
        if "epsilon" in pa:
            pa["epsilon"] = _coerce(pa["epsilon"], 0.0, "paths.epsilon")
        paths = PathSpec(**pa)
        ver = _section(data.get("verify"), "verify", ("artifacts",))
        verify_dir = Path(ver["artifacts"]) if "artifacts" in ver else None
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ConfigError(f"malformed configuration: {exc}") from exc
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    cfg = RunConfig(problem=problem, grid=grid, system=system, scalar=scalar,
                    coupled=coupled, scaled=tuple(scaled), solver=solver, sweep=sweep,
                    paths=paths, verify_dir=verify_dir, seed=seed,
                    out=Path(data.get("out", "results")), force=bool(data.get("force", False)),
                    source=source)
    return cfg.with_overrides()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ArtifactError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ArtifactError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping at top level")
    return parse_config(data, source=path)
