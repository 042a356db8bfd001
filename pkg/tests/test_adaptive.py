import warnings

import numpy as np
import pytest

from rdmor.adaptive import (
    ZoneSettings,
    cross_gram,
    prepare_adaptive,
    run_adaptive_online,
    run_zone,
    split_snapshots,
    transfer_ic,
)
from rdmor.bench import OfflineArtifacts, relative_error, run_method
from rdmor.errors import DimensionError, DomainError, SplitError
from rdmor.full_solver import SnapshotSet, compute_indicators


def _toy_snapshots(m=5, n=3):
    S = np.arange(float(n * m)).reshape(n, m)
    return SnapshotSet(S, S + 1, S, S, np.arange(m) * 0.5, 2, 0.25)


def test_split_sizes_share_tau_column():
    a, b = split_snapshots(_toy_snapshots(), 2)
    assert (a.m, b.m) == (3, 3)
    np.testing.assert_array_equal(a.S_u[:, -1], b.S_u[:, 0])
    np.testing.assert_array_equal(b.steps, [4, 6, 8])


@pytest.mark.parametrize("idx", [0, 4, 7])
def test_split_rejects_endpoints(idx):
    with pytest.raises(SplitError):
        split_snapshots(_toy_snapshots(), idx)


def test_transfer_identity_and_orthogonal(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((8, 6)))
    x = rng.standard_normal(3)
    np.testing.assert_allclose(transfer_ic(Q[:, :3], Q[:, :3], x), x, atol=1e-14)
    np.testing.assert_allclose(cross_gram(Q[:, :3], Q[:, :3]), np.eye(3), atol=1e-14)
    with pytest.warns(UserWarning, match="orthogonal"):
        out = transfer_ic(Q[:, :3], Q[:, 3:], x)
    np.testing.assert_allclose(out, 0.0, atol=1e-14)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        transfer_ic(Q[:, :3], Q[:, 3:], np.zeros(3))


@pytest.fixture(scope="module")
def adaptive_setup(small_schnakenberg):
    model, disc, tg, u0, v0, run = small_schnakenberg
    ind = compute_indicators(run.snapshots)
    split = prepare_adaptive(model, disc, run.snapshots, ind.tau_index, tg)
    return model, disc, tg, u0, v0, run, ind, split


def test_zone_geometry(adaptive_setup):
    model, disc, tg, u0, v0, run, ind, split = adaptive_setup
    z1, z2 = split.zones
    assert 0 < ind.tau_index < run.snapshots.m - 1
    assert z1.step_start == 0 and z1.step_end == z2.step_start == split.tau_step
    assert z2.step_end == tg.n_t
    assert z1.t_end == pytest.approx(split.tau)
    assert z1.snapshots.m + z2.snapshots.m == run.snapshots.m + 1
    full_rank = max(np.linalg.matrix_rank(run.snapshots.S_u), np.linalg.matrix_rank(run.snapshots.S_v))
    assert z2.R <= full_rank
    s = split.summary()
    assert len(s["zones"]) == 2 and s["offline_correction_time"] > 0
    assert z1.coupling.trajectory.t0 == 0.0
    assert z2.coupling.trajectory.t0 == pytest.approx(split.tau)


def test_composite_continuity_and_defect(adaptive_setup):
    model, disc, tg, u0, v0, run, ind, split = adaptive_setup
    z1, z2 = split.zones
    r1, r2 = z1.R, 14
    res = run_adaptive_online(split, model, u0, v0, "podc", r1, r2)
    assert res.stable
    b1, b2 = z1.basis.truncate(r1), z2.basis.truncate(r2)
    np.testing.assert_allclose(res.u_tau, b1.Psi_u @ res.zone1.final_u)
    lifted_ic = b2.Psi_u @ res.zone2.u[0]
    assert np.linalg.norm(res.u_tau - lifted_ic) == pytest.approx(res.transfer_defect_u, rel=1e-10)
    oracle = np.linalg.norm(res.u_tau - b2.Psi_u @ (b2.Psi_u.T @ res.u_tau))
    assert res.transfer_defect_u == pytest.approx(oracle, rel=1e-10)
    # defect bounded by 10x the zone-1 reconstruction error at tau
    z1_err = np.linalg.norm(res.u_tau - run.snapshots.S_u[:, ind.tau_index])
    assert res.transfer_defect_u <= 10 * z1_err
    assert res.zone2.times[-1] == pytest.approx(tg.T)
    assert res.online_time > 0


def test_adaptive_error_close_to_non_adaptive(adaptive_setup):
    model, disc, tg, u0, v0, run, ind, split = adaptive_setup
    art = OfflineArtifacts.build(model, disc, run.snapshots, tg, u0, v0, methods=("podc",))
    r1 = split.zones[0].R
    for r in (4, 8, 14):
        base = run_method(art, "podc", r)
        e0 = relative_error(base.lift(art.basis.Psi_u, art.basis.Psi_v)[0], run.u)
        res = run_adaptive_online(split, model, u0, v0, "podc", min(r, r1), r)
        assert relative_error(res.u_final, run.u) <= 10 * e0


def test_zone_errors(adaptive_setup):
    model, disc, tg, u0, v0, run, ind, split = adaptive_setup
    z1 = split.zones[0]
    with pytest.raises(DimensionError):
        run_zone(z1, "podc", z1.R + 1, model, np.zeros(1), np.zeros(1))
    with pytest.raises(DomainError):
        run_zone(z1, "galerkin", 2, model, np.zeros(2), np.zeros(2))
    with pytest.raises(DomainError):
        prepare_adaptive(model, disc, run.snapshots, ind.tau_index, tg, zone2_start="exact")


def test_zone_settings_clamp_and_truncate(small_schnakenberg):
    model, disc, tg, u0, v0, run = small_schnakenberg
    ind = compute_indicators(run.snapshots)
    split = prepare_adaptive(model, disc, run.snapshots, ind.tau_index, tg,
                             zone1=ZoneSettings(R=5, ell=10**6), zone2=ZoneSettings(R=10**6, ell=7),
                             with_correction=False)
    z1, z2 = split.zones
    assert z1.R == 5 and z1.deim.ell == z1.deim.rho_kin
    assert z2.R == z2.basis.rho_sol and z2.deim.ell == 7
    assert z1.coupling is None
    res = run_adaptive_online(split, model, u0, v0, "pod-deim", 4, 5)
    assert res.zone1.method == "pod-deim"


def test_zone1_resampling_doubles_columns(small_schnakenberg):
    model, disc, tg, u0, v0, run = small_schnakenberg
    ind = compute_indicators(run.snapshots)
    tau_index = ind.tau_index
    split = prepare_adaptive(model, disc, run.snapshots, tau_index, tg, zone1_stride=2,
                             with_deim=False, with_correction=False)
    assert split.zones[0].snapshots.m == 2 * tau_index + 1
    np.testing.assert_allclose(split.zones[0].snapshots.S_u[:, ::2],
                               run.snapshots.S_u[:, : tau_index + 1], rtol=1e-12)
    with pytest.raises(DomainError):
        prepare_adaptive(model, disc, run.snapshots, tau_index, tg, zone1_stride=5,
                         with_deim=False, with_correction=False)
