import csv
import hashlib
import json

import pytest

from rdmor import cli
from rdmor.config import ExperimentConfig

TINY = """
[model]
name = schnakenberg
d_u = 1.0
d_v = 10.0
[grid]
n_x = 10
n_y = 10
[time]
T = 0.05
h_t = 1e-4
stride = 4
[init]
seed = 42
amplitude = 1e-2
[mor]
r_values = 2,6,10
R = 12
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(TINY)
    return p, tmp_path / "runs"


def _digests(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.glob("*.rdm"))}


def test_pipeline(tiny, capsys):
    cfg_path, out = tiny
    args = ["--config", str(cfg_path), "--out", str(out)]
    assert cli.main(["simulate", *args]) == 0
    cfg = ExperimentConfig.from_file(cfg_path).with_output(out)
    sim = cli.simulation_dir(cfg)
    assert {p.name for p in sim.glob("*.rdm")} == {"S_u.rdm", "S_v.rdm", "S_f.rdm", "S_g.rdm"}
    assert "tau" in json.loads((sim / "indicators.json").read_text())
    first = _digests(sim)
    # cached rerun is a no-op; forced rerun reproduces identical files
    assert cli.main(["simulate", *args]) == 0
    assert cli.main(["simulate", *args, "--force"]) == 0
    assert _digests(sim) == first

    assert cli.main(["sweep", *args]) == 0
    run = cli.run_dir(cfg)
    rows = list(csv.DictReader((run / "sweep.csv").open()))
    for m in ("pod", "podc", "pod-deim", "pod-deimc"):
        assert sorted(int(r["r"]) for r in rows if r["method"] == m) == [2, 6, 10]
    manifest = json.loads((run / "sweep.json").read_text())
    assert manifest["config_hash"] == cfg.hash and manifest["seed"] == 42

    assert cli.main(["reduce", *args, "--method", "podc", "--r", "12"]) == 0
    assert cli.main(["reduce", *args, "--method", "pod", "--r", "12"]) == 0
    podc = json.loads((run / "reduce-podc-r12.json").read_text())
    pod = json.loads((run / "reduce-pod-r12.json").read_text())
    assert podc["err_u"] == pytest.approx(pod["err_u"], rel=1e-10)

    assert cli.main(["adaptive", *args]) == 0
    doc = json.loads((run / "adaptive.json").read_text())
    assert len(doc["split"]["zones"]) == 2 and doc["offline"]["ratio"] > 0
    assert cli.main(["report", *args]) == 0
    assert (run / "sweep-timing.csv").exists()
    assert "tol" in capsys.readouterr().out


def test_seed_override_changes_outputs(tiny):
    cfg_path, out = tiny
    args = ["--config", str(cfg_path), "--out", str(out)]
    assert cli.main(["simulate", *args, "--seed", "1"]) == 0
    assert cli.main(["simulate", *args]) == 0
    cfg = ExperimentConfig.from_file(cfg_path).with_output(out)
    a = _digests(cli.simulation_dir(cfg))
    b = _digests(cli.simulation_dir(cfg.with_seed(1)))
    assert a["S_u.rdm"] != b["S_u.rdm"]


def test_usage_errors(tiny, tmp_path, capsys):
    cfg_path, out = tiny
    assert cli.main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "empty")]) == 1
    assert "rdmor simulate" in capsys.readouterr().err
    assert cli.main(["report", "--config", str(cfg_path), "--out", str(tmp_path / "empty")]) == 1
    assert cli.main(["sweep"]) == 1
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.ini")]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[grid]\nn_z = 4\n")
    assert cli.main(["show-config", "--config", str(bad)]) == 1
    assert "grid.n_z" in capsys.readouterr().err
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["sweep", "--preset", "fhn", "--config", str(cfg_path)]) == 1


def test_show_config(capsys):
    assert cli.main(["show-config", "--preset", "dib"]) == 0
    text = capsys.readouterr().out
    assert ExperimentConfig.from_string(text).model.name == "dib"


def test_numerical_failure_exit_code(tmp_path):
    p = tmp_path / "blow.ini"
    p.write_text("[model]\nname = fhn\ngamma = 1e6\n[grid]\nn_x = 4\nn_y = 4\n[time]\nT = 1.0\nh_t = 0.1\n"
                 "[init]\namplitude = 10.0\n")
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
