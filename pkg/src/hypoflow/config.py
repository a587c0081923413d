"""Run configuration: TOML tables mapped onto dataclasses.

Unknown tables or keys are rejected. Values given as "auto" are resolved
against the model before anything runs, and the resolved configuration is
what gets embedded in every output.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

import tomli

from . import grid as G
from .flow import SCHEMES, aligned_dt, stability_limit
from .potential import (FAMILIES, HamiltonianModel, PotentialSpec, first_steep_radius,
                        hessian_weight_bound, recommended_eta)
from .psi import PsiKind


class ConfigError(ValueError):
    pass


AUTO = "auto"


@dataclass
class PotentialTable:
    family: str = "quadratic"
    l: int = 4
    a: float = 1.0
    b: float = 0.5
    offset: float | None = None
    coefficients: list = field(default_factory=list)
    eta: object = AUTO


@dataclass
class GridTable:
    Rx: object = 8.0
    Ry: object = 8.0
    nx: int = 128
    ny: int = 128


@dataclass
class FlowTable:
    T: float = 5.0
    dt: object = AUTO
    output_every: int = 40
    align: float = 0.25          # auto dt divides this period exactly
    scheme: str = "muscl"
    kind: str = "entropy"
    mean0: list = field(default_factory=lambda: [0.0, 0.0])
    cov0: list = field(default_factory=lambda: [[0.25, 0.0], [0.0, 0.25]])


@dataclass
class ConstantsTable:
    rho: object = 2.0
    hess_bound: object = AUTO
    d: int = 1
    envelope_times: list = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 5.0])


@dataclass
class LyapunovTable:
    alpha: list = field(default_factory=lambda: [0.05, 0.95, 19])
    beta: list = field(default_factory=lambda: [0.05, 0.95, 19])
    R: object = AUTO
    region: object = AUTO
    n_scan: int = 201
    radii: list = field(default_factory=lambda: [2.0, 40.0, 20])


@dataclass
class ParticlesTable:
    n: int = 100_000
    dt: float = 1e-3
    T: float = 2.0
    seed: int = 0
    record_times: list = field(default_factory=lambda: [0.5, 1.0, 2.0])


@dataclass
class RunConfig:
    potential: PotentialTable = field(default_factory=PotentialTable)
    grid: GridTable = field(default_factory=GridTable)
    flow: FlowTable = field(default_factory=FlowTable)
    constants: ConstantsTable = field(default_factory=ConstantsTable)
    lyapunov: LyapunovTable = field(default_factory=LyapunovTable)
    particles: ParticlesTable = field(default_factory=ParticlesTable)
    resolved: bool = False

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("resolved")
        return d

    def spec(self) -> PotentialSpec:
        p = self.potential
        return PotentialSpec(p.family, l=int(p.l), a=float(p.a), b=float(p.b),
                             coefficients=tuple(p.coefficients), offset=p.offset)

    def model(self) -> HamiltonianModel:
        if self.potential.eta == AUTO:
            raise ConfigError("eta is unresolved; call resolve() first")
        return HamiltonianModel(self.spec(), float(self.potential.eta))

    def build_grid(self) -> G.PhaseGrid:
        g = self.grid
        return G.build_grid(self.model(), float(g.Rx), float(g.Ry), int(g.nx), int(g.ny))


_TABLES = {f.name: f.type for f in fields(RunConfig) if f.name != "resolved"}
_CLASSES = {"potential": PotentialTable, "grid": GridTable, "flow": FlowTable,
            "constants": ConstantsTable, "lyapunov": LyapunovTable, "particles": ParticlesTable}


def _number(v, where, auto=False, special=()):
    if auto and v == AUTO or v in special:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        allowed = " or ".join([repr(AUTO)] * auto + [repr(s) for s in special] + ["a number"])
        raise ConfigError(f"{where} must be {allowed}, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where} must be finite")
    return float(v)


def _integer(v, where, lo=1):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{where} must be an integer >= {lo}, got {v!r}")
    return v


def _validate(cfg: RunConfig):
    p, g, fl, c, ly, pa = cfg.potential, cfg.grid, cfg.flow, cfg.constants, cfg.lyapunov, cfg.particles
    if p.family not in FAMILIES:
        raise ConfigError(f"potential.family must be one of {FAMILIES}, got {p.family!r}")
    p.l = _integer(p.l, "potential.l", 2)
    p.a = _number(p.a, "potential.a")
    p.b = _number(p.b, "potential.b")
    if p.offset is not None:
        p.offset = _number(p.offset, "potential.offset")
    p.eta = _number(p.eta, "potential.eta", auto=True)
    g.Rx = _number(g.Rx, "grid.Rx", auto=True)
    g.Ry = _number(g.Ry, "grid.Ry", auto=True)
    g.nx = _integer(g.nx, "grid.nx", 4)
    g.ny = _integer(g.ny, "grid.ny", 4)
    fl.T = _number(fl.T, "flow.T")
    fl.dt = _number(fl.dt, "flow.dt", auto=True)
    fl.output_every = _integer(fl.output_every, "flow.output_every")
    fl.align = _number(fl.align, "flow.align")
    if fl.scheme not in SCHEMES:
        raise ConfigError(f"flow.scheme must be one of {SCHEMES}, got {fl.scheme!r}")
    try:
        PsiKind(fl.kind)
    except ValueError:
        raise ConfigError(f"flow.kind must be one of {[k.value for k in PsiKind]}") from None
    c.rho = _number(c.rho, "constants.rho", special=("gap-estimate",))
    c.hess_bound = _number(c.hess_bound, "constants.hess_bound", auto=True)
    c.d = _integer(c.d, "constants.d")
    ly.R = _number(ly.R, "lyapunov.R", auto=True)
    for key in ("alpha", "beta"):
        v = getattr(ly, key)
        if not (isinstance(v, list) and len(v) == 3 and 0 < v[0] <= v[1] < 1):
            raise ConfigError(f"lyapunov.{key} must be [min, max, count] inside (0, 1)")
        _integer(v[2], f"lyapunov.{key}[2]")
    if not (isinstance(ly.radii, list) and len(ly.radii) == 3 and ly.radii[0] < ly.radii[1]):
        raise ConfigError("lyapunov.radii must be [start, stop, count] with start < stop")
    if ly.region != AUTO and not (isinstance(ly.region, list) and len(ly.region) == 2):
        raise ConfigError("lyapunov.region must be 'auto' or [Rx, Ry]")
    ly.n_scan = _integer(ly.n_scan, "lyapunov.n_scan", 3)
    pa.n = _integer(pa.n, "particles.n")
    pa.dt = _number(pa.dt, "particles.dt")
    pa.T = _number(pa.T, "particles.T")
    pa.seed = _integer(pa.seed, "particles.seed", 0)
    if any(t < 0 or t > pa.T for t in pa.record_times):
        raise ConfigError("particles.record_times must lie in [0, particles.T]")


def from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_CLASSES)
    if unknown:
        raise ConfigError(f"unknown table(s): {', '.join(sorted(unknown))}")
    tables = {}
    for name, cls in _CLASSES.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        known = {f.name for f in fields(cls)}
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
        tables[name] = cls(**raw)
    cfg = RunConfig(**tables)
    _validate(cfg)
    return cfg


def load(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return from_dict(data)


def resolve(cfg: RunConfig) -> RunConfig:
    """Replace every "auto" by a concrete value (in place) and return cfg.

    rho = "gap-estimate" is left for the caller, since it needs an eigensolve.
    """
    spec = cfg.spec()
    if cfg.potential.eta == AUTO:
        cfg.potential.eta = float(recommended_eta(spec))
    if cfg.potential.offset is None:
        cfg.potential.offset = float(spec.offset)
    model = cfg.model()
    if AUTO in (cfg.grid.Rx, cfg.grid.Ry):
        rx, ry = G.suggest_box(model)
        cfg.grid.Rx = rx if cfg.grid.Rx == AUTO else cfg.grid.Rx
        cfg.grid.Ry = ry if cfg.grid.Ry == AUTO else cfg.grid.Ry
    if cfg.constants.hess_bound == AUTO:
        hb = hessian_weight_bound(model, (-cfg.grid.Rx, cfg.grid.Rx))
        cfg.constants.hess_bound = float(hb.value)
    if cfg.lyapunov.R == AUTO:
        cfg.lyapunov.R = float(first_steep_radius(spec))
    if cfg.lyapunov.region == AUTO:
        cfg.lyapunov.region = [float(cfg.grid.Rx), float(cfg.grid.Ry)]
    if cfg.flow.dt == AUTO:
        cfg.flow.dt = float(aligned_dt(stability_limit(cfg.build_grid()), cfg.flow.align))
    cfg.resolved = True
    return cfg


def dumps_toml(d: dict) -> str:
    """Minimal TOML writer for the config shape used here."""
    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    out = []
    for table, body in d.items():
        out.append(f"[{table}]")
        for k, v in body.items():
            if v is not None:
                out.append(f"{k} = {val(v)}")
        out.append("")
    return "\n".join(out)
