import json
import subprocess
import sys
from pathlib import Path

import pytest

from hypoflow import cli
from hypoflow import config as cfgmod

SMALL = """
[potential]
family = "quadratic"
eta = 0.0

[grid]
Rx = 8.0
Ry = 8.0
nx = 48
ny = 48

[flow]
T = 1.0
output_every = 5

[constants]
rho = 2.0
hess_bound = 1.0

[lyapunov]
alpha = [0.2, 0.8, 4]
beta = [0.2, 0.8, 4]
R = 2.0
region = [5.0, 5.0]
n_scan = 61
radii = [2.0, 10.0, 6]

[particles]
n = 2000
dt = 0.01
T = 0.5
seed = 3
record_times = [0.25, 0.5]
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run_json(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr().out
    return rc, json.loads(out)


def test_constants_quadratic(capsys, small_cfg):
    rc, d = run_json(capsys, "constants", "--config", str(small_cfg))
    assert rc == 0
    assert d["lambda"] == 9.0
    assert d["kappa"] == pytest.approx(1 / 1300, rel=1e-15)
    assert d["M2"] == 1.0
    assert d["config"]["potential"]["eta"] == 0.0


def test_flow_writes_outputs(capsys, small_cfg, tmp_path):
    out = tmp_path / "res"
    rc, d = run_json(capsys, "flow", "--config", str(small_cfg), "--out", str(out))
    assert rc == 0 and d["holds"] and d["gMonotone"]
    csv_text = (out / "decay.csv").read_text().splitlines()
    assert csv_text[0].startswith("# config {")
    assert csv_text[1].startswith("t,ent,")
    # the embedded config is fully resolved: no "auto" left
    assert "auto" not in json.dumps(d["config"])
    assert json.loads((out / "verdict.json").read_text())["holds"] is True


def test_rerun_from_embedded_config_is_identical(capsys, small_cfg, tmp_path):
    a = tmp_path / "a"
    run_json(capsys, "flow", "--config", str(small_cfg), "--out", str(a))
    embedded = json.loads((a / "verdict.json").read_text())["config"]
    again = tmp_path / "again.toml"
    again.write_text(cfgmod.dumps_toml(embedded))
    b = tmp_path / "b"
    run_json(capsys, "flow", "--config", str(again), "--out", str(b))
    body = lambda p: (p / "decay.csv").read_text().split("\n", 1)[1]
    assert body(a) == body(b)


def test_unknown_key_exit_1(capsys, tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[grid]\nfoo = 1\n")
    assert cli.main(["constants", "--config", str(p)]) == 1
    assert "foo" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["[grid]\nnx = 2\n", "[potential]\nfamily = 'cubic'\n",
                                  "[nonsense]\n", "[constants]\nrho = 'big'\n", "not toml ["])
def test_invalid_configs_exit_1(capsys, tmp_path, text):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    assert cli.main(["constants", "--config", str(p)]) == 1


def test_missing_config_and_bad_args(capsys):
    assert cli.main(["constants", "--config", "/nonexistent.toml"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_resolve_fills_auto():
    cfg = cfgmod.resolve(cfgmod.from_dict({"potential": {"family": "even-monomial", "l": 4},
                                                "grid": {"Rx": "auto"}}))
    assert cfg.potential.eta == 0.25
    assert isinstance(cfg.constants.hess_bound, float) and cfg.constants.hess_bound > 0
    assert isinstance(cfg.flow.dt, float)
    assert round(cfg.flow.align / cfg.flow.dt) * cfg.flow.dt == pytest.approx(cfg.flow.align)
    assert cfg.lyapunov.region == [cfg.grid.Rx, cfg.grid.Ry]


def test_lyapunov_and_gap(capsys, small_cfg):
    rc, d = run_json(capsys, "lyapunov", "--config", str(small_cfg))
    assert rc == 0
    for key in ("feasible", "growth", "theta", "config"):
        assert key in d
    assert d["feasible"] and d["growth"]["holds"]
    rc, g = run_json(capsys, "gap", "--config", str(small_cfg))
    assert rc == 0 and abs(g["gap"] - 1) < 0.05
    assert g["C1"] == pytest.approx(1 / g["marginal_gap"])


def test_gap_estimate_rho(capsys, tmp_path):
    p = tmp_path / "g.toml"
    p.write_text(SMALL.replace("rho = 2.0", 'rho = "gap-estimate"'))
    rc, d = run_json(capsys, "constants", "--config", str(p))
    assert rc == 0
    assert d["rho"] == pytest.approx(2 / d["gap"])
    assert d["config"]["constants"]["rho"] == d["rho"]


def test_particles_and_report(capsys, small_cfg, tmp_path):
    out = tmp_path / "res"
    rc, d = run_json(capsys, "particles", "--config", str(small_cfg), "--out", str(out))
    assert rc == 0 and d["escapes"] == 0
    lines = (out / "moments.csv").read_text().splitlines()
    assert lines[0].startswith("# config") and lines[1].startswith("t,mean_x")
    assert len(lines) == 4
    run_json(capsys, "constants", "--config", str(small_cfg), "--out", str(out))
    assert cli.main(["report", "--out", str(out)]) == 0
    text = (out / "report.md").read_text()
    assert "| constants | lambda | 9.0 |" in text and "particles" in text


def test_report_empty_dir_exit_1(capsys, tmp_path):
    assert cli.main(["report", "--out", str(tmp_path)]) == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hypoflow.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "selftest" in r.stdout


def test_shipped_configs_load():
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.toml")):
        cfg = cfgmod.resolve(cfgmod.load(p))
        assert cfg.resolved
