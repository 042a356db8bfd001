import json
import math

import numpy as np
import pytest

from rdmor.bench import (
    ErrorReport,
    OfflineArtifacts,
    SweepRecord,
    error_jumps,
    relative_error,
    run_method,
    sweep,
    timing_table,
    tolerance_table,
    write_manifest,
)
from rdmor.errors import DimensionError, DomainError


def test_relative_error(rng):
    x = rng.standard_normal((4, 3))
    assert relative_error(x, x) == 0.0
    assert relative_error(2 * x, x) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DomainError):
        relative_error(x, np.zeros_like(x))
    with pytest.raises(DimensionError):
        relative_error(x, x[:2])


def _report(rows):
    return ErrorReport([SweepRecord(m, r, e, e, 0.1, not math.isnan(e)) for m, r, e in rows])


def test_error_jumps_and_tolerance_table():
    rep = _report([("pod", 3, 1e-3), ("pod", 1, 1e-1), ("pod", 2, 1e-2), ("pod", 4, 5e-2),
                   ("pod", 5, math.nan), ("podc", 1, 1e-1), ("podc", 2, 1e-3), ("podc", 3, 1e-4)])
    r, e = rep.series("pod")
    assert r.tolist() == [1, 2, 3, 4, 5]
    assert np.isnan(e[-1])
    assert rep.unstable("pod") == [5]
    jumps = error_jumps(rep, "pod")
    assert [(a, b) for a, b, _ in jumps] == [(3, 4), (4, 5)]
    assert jumps[1][2] == math.inf
    assert error_jumps(rep, "podc") == []
    tab = {row["tol"]: row["r0"] for row in tolerance_table(rep, "podc")}
    assert tab[1e-2] == 2 and tab[1e-4] == 3 and tab[1e-5] is None
    assert tolerance_table(rep, "pod")[0]["r0"] is None


def test_report_csv_round_trip(tmp_path):
    rep = _report([("podc", 2, 1.2345678901234567e-5), ("pod", 2, math.nan), ("pod", 1, 0.5)])
    assert [(x.method, x.r) for x in rep.records] == [("pod", 1), ("pod", 2), ("podc", 2)]
    p = rep.write_csv(tmp_path / "s.csv")
    header = p.read_text().splitlines()[0]
    assert header == "method,r,err_u,err_v,online_s,stable"
    back = ErrorReport.read_csv(p)
    assert back.record("podc", 2).err_u == 1.2345678901234567e-5
    assert not back.record("pod", 2).stable
    with pytest.raises(KeyError):
        back.record("pod", 9)
    assert len(rep.to_dict()["records"]) == 3


def test_timing_table_and_manifest(tmp_path):
    assert timing_table(ErrorReport([])) == []
    rep = _report([("pod", 1, 0.1)])
    row = timing_table(rep, {"vector": 1.0})[0]
    assert row["speedup_vector"] == pytest.approx(10.0)
    p = write_manifest(tmp_path / "m.json", config_hash="abc", seed=42, offline={"svd": np.float64(1.5)},
                       extra={"ranks": np.array([1, 2])})
    doc = json.loads(p.read_text())
    assert doc == {"config_hash": "abc", "seed": 42, "offline": {"svd": 1.5}, "ranks": [1, 2]}


@pytest.fixture(scope="module")
def artifacts(small_schnakenberg):
    model, disc, tg, u0, v0, run = small_schnakenberg
    art = OfflineArtifacts.build(model, disc, run.snapshots, tg, u0, v0)
    return art, run


def test_artifacts_build(artifacts, small_schnakenberg):
    art, run = artifacts
    assert set(art.timings) == {"svd", "operators", "deim", "R_trajectory", "kinetics_cache"}
    assert art.summary()["R"] == art.R == art.basis.rho_sol
    model, disc, tg, u0, v0, _ = small_schnakenberg
    lean = OfflineArtifacts.build(model, disc, run.snapshots, tg, u0, v0, methods=("pod",))
    assert lean.deim is None and lean.coupling is None
    with pytest.raises(DomainError):
        run_method(lean, "podc", 2)
    with pytest.raises(DomainError):
        run_method(lean, "pod-deim", 2)
    with pytest.raises(DomainError):
        OfflineArtifacts.build(model, disc, run.snapshots, tg, u0, v0, methods=("magic",))
    with pytest.raises(DimensionError):
        run_method(art, "pod", art.R + 1)


def test_sweep_complete_deterministic_and_parallel(artifacts):
    art, run = artifacts
    methods = ["pod", "podc", "pod-deim", "pod-deimc"]
    rs = [2, 6, 10]
    a = sweep(methods, rs, art, (run.u, run.v))
    assert len(a) == len(methods) * len(rs)
    assert {(x.method, x.r) for x in a.records} == {(m, r) for m in methods for r in rs}
    for rec in a.records:
        assert (rec.stable and rec.err_u >= 0) or (not rec.stable and math.isnan(rec.err_u))
    b = sweep(methods, rs, art, (run.u, run.v), workers=4)
    for x, y in zip(a.records, b.records):
        assert (x.method, x.r) == (y.method, y.r)
        assert x.err_u == y.err_u or (math.isnan(x.err_u) and math.isnan(y.err_u))
    single = sweep(["pod"], [3], art, (run.u, run.v))
    assert len(single) == 1


def test_sweep_records_failures(artifacts):
    art, run = artifacts
    rep = sweep(["pod"], [art.R + 5], art, (run.u, run.v))
    assert rep.records[0].stable is False
