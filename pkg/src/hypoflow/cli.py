"""Command-line front end.

    hypoflow constants --config run.toml
    hypoflow flow      --config run.toml --out results/
    hypoflow lyapunov  --config run.toml
    hypoflow gap       --config run.toml
    hypoflow particles --config run.toml --out results/ [--compare]
    hypoflow report    --out results/
    hypoflow selftest

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import checks
from . import config as cfgmod
from . import constants as C
from . import flow as F
from . import grid as G
from . import lyapunov as L
from . import particles as P
from .potential import DomainError, IncompatibleEtaError
from .psi import PositivityError, PsiKind

log = logging.getLogger("hypoflow")

NUMERICAL = (F.BlowUpError, L.SolverError, PositivityError, ArithmeticError, np.linalg.LinAlgError)
VALIDATION = (cfgmod.ConfigError, G.TruncationError, DomainError, IncompatibleEtaError,
              C.InvalidConstantError, ValueError, OSError)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def _emit(obj, out_dir=None, name=None):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=False)
    if out_dir is not None and name:
        Path(out_dir, name).write_text(text + "\n")
    print(text)


def _config_comment(cfg) -> str:
    return "config " + json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)


def _load(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    return cfgmod.resolve(cfg)


def _rho(cfg, grid=None):
    """Numeric rho; "gap-estimate" becomes 2 / gap (a lower-bound estimate)."""
    if cfg.constants.rho != "gap-estimate":
        return float(cfg.constants.rho), None
    grid = grid or cfg.build_grid()
    res = L.spectral_gap(grid)
    rho = 2.0 / res.gap
    cfg.constants.rho = rho
    return rho, res.gap


def _theorem_constants(cfg, grid=None):
    rho, gap = _rho(cfg, grid)
    c = C.theorem1_constants(float(cfg.potential.eta), cfg.constants.d,
                             float(cfg.constants.hess_bound), rho)
    return c, gap


def cmd_constants(args) -> int:
    cfg = _load(args)
    c, gap = _theorem_constants(cfg)
    out = c.to_dict(cfg.constants.envelope_times, 1.0)
    if gap is not None:
        out["rho_source"] = "gap-estimate (2/gap; weighted Poincare level, a lower-bound sanity input)"
        out["gap"] = gap
    m2 = C.m2_quadrature(float(cfg.potential.eta), cfg.constants.d)
    c1 = 1.0 / L.marginal_gap(cfg.model(), float(cfg.grid.Rx)).gap
    out.update(M2=m2, C1=c1, C_prime=C.propagate_poincare_constant(c1, m2), config=cfg.to_dict())
    _emit(out, args.out, "constants.json")
    return 0


def _initial(cfg, grid):
    return F.gaussian_initial(grid, cfg.flow.mean0, cfg.flow.cov0)


def cmd_flow(args) -> int:
    cfg = _load(args)
    grid = cfg.build_grid()
    c, _ = _theorem_constants(cfg, grid)
    fl = cfg.flow
    report = F.run(grid, _initial(cfg, grid), c, fl.T, fl.output_every, fl.dt, fl.scheme,
                   PsiKind(fl.kind))
    verdict = F.verify_theorem1(report, c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "decay.csv").write_text(report.to_csv(_config_comment(cfg)))
    rep = report.to_json()
    rep["config"] = cfg.to_dict()
    (out / "decay.json").write_text(json.dumps(_jsonable(rep)) + "\n")
    verdict.update(meta=report.meta, constants=c.to_dict(), config=cfg.to_dict())
    _emit(verdict, out, "verdict.json")
    return 0


def _range(v):
    return np.linspace(float(v[0]), float(v[1]), int(v[2]))


def cmd_lyapunov(args) -> int:
    cfg = _load(args)
    model = cfg.model()
    ly = cfg.lyapunov
    region = tuple(map(float, ly.region))
    res = L.search_candidate(model, _range(ly.alpha), _range(ly.beta), region, ly.n_scan)
    out = res.to_dict()
    if not res.feasible:
        out.update(alpha=None, beta=None, lambda_drift=None, b_drift=None, margin=None,
                   holds=False, region=list(region))
    out["growth"] = L.corollary3_check(model, float(ly.R))
    try:
        scan = L.theta_scan(model, _range(ly.radii))
        out["theta"] = {"radii": scan.radii, "theta": scan.theta, "C0": scan.C0, "c": scan.c,
                        "fitOk": scan.fit_ok, "min_grad_H": scan.grad_floor}
    except DomainError as e:
        out["theta"] = {"error": str(e)}
    out["config"] = cfg.to_dict()
    _emit(out, args.out, "lyapunov.json")
    return 0


def cmd_gap(args) -> int:
    cfg = _load(args)
    grid = cfg.build_grid()
    res = L.spectral_gap(grid)
    out = res.to_dict(float(cfg.potential.eta))
    m = L.marginal_gap(cfg.model(), float(cfg.grid.Rx))
    out.update(marginal_gap=m.gap, C1=1.0 / m.gap, config=cfg.to_dict())
    _emit(out, args.out, "gap.json")
    return 0


def cmd_particles(args) -> int:
    cfg = _load(args)
    pa = cfg.particles
    sim_cfg = P.SimConfig(cfg.model(), pa.n, pa.dt, pa.T, pa.seed,
                          tuple(cfg.flow.mean0), tuple(map(tuple, cfg.flow.cov0)),
                          (float(cfg.grid.Rx), float(cfg.grid.Ry)))
    sim = P.simulate(sim_cfg, pa.record_times)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "moments.csv").write_text(sim.to_csv(_config_comment(cfg)))
    summary = {"escapes": sim.escapes, "meta": sim.meta}
    if args.compare:
        grid = cfg.build_grid()
        c, _ = _theorem_constants(cfg, grid)
        rep = F.run(grid, _initial(cfg, grid), c, max(pa.record_times), cfg.flow.output_every,
                    cfg.flow.dt, cfg.flow.scheme, record_times=pa.record_times)
        summary["comparison"] = P.compare_to_flow(sim, rep.moments)
    summary["config"] = cfg.to_dict()
    _emit(summary, out, "particles.json")
    return 0 if not args.compare or summary["comparison"]["pass"] else 2


def cmd_report(args) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise ValueError(f"{out} is not a directory")
    summary = {}
    for name in ("constants", "verdict", "lyapunov", "gap", "particles"):
        p = out / f"{name}.json"
        if p.exists():
            d = json.loads(p.read_text())
            d.pop("config", None)
            summary[name] = d
    if not summary:
        raise ValueError(f"no hypoflow outputs found in {out}")
    lines = ["| output | key | value |", "|---|---|---|"]
    for name, d in summary.items():
        for k, v in d.items():
            if isinstance(v, (int, float, bool, str)) or v is None:
                lines.append(f"| {name} | {k} | {v} |")
    (out / "report.md").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def cmd_selftest(args) -> int:
    results = checks.run_all(progress=lambda r: print(r.line(), flush=True))
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed")
    return 0 if n_ok == len(results) else 2


COMMANDS = {"constants": cmd_constants, "flow": cmd_flow, "lyapunov": cmd_lyapunov,
            "gap": cmd_gap, "particles": cmd_particles, "report": cmd_report,
            "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypoflow", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name not in ("report", "selftest"):
            p.add_argument("--config", help="TOML run configuration (defaults if omitted)")
        if name in ("flow", "particles", "report"):
            p.add_argument("--out", default=".", help="output directory")
        elif name != "selftest":
            p.add_argument("--out", default=None, help="also write the JSON here")
        if name == "particles":
            p.add_argument("--compare", action="store_true",
                           help="run the grid flow too and report z-scores")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NUMERICAL as e:
        print(f"hypoflow: numerical failure: {e}", file=sys.stderr)
        return 2
    except VALIDATION as e:
        print(f"hypoflow: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
