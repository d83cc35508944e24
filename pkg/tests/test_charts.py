import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcharts.charts import (
    ChartFrame,
    contributions,
    control_charts_pca,
    empirical_limit,
    pca_statistics,
    spe_from_scores,
    spe_statistic,
    t2_statistic,
)
from mfcharts.errors import BasisMismatch, EmptyInput, UnknownId
from mfcharts.mfd import MFD, mfd_from_grid
from mfcharts.mfpca import fit_mfpca, project_scores

from .oracles import empirical_limit_oracle


def test_limit_convention():
    stats = np.arange(1, 101, dtype=float)
    assert empirical_limit(stats, 0.05) == 95.0
    assert empirical_limit(stats[::-1], 0.05) == 95.0
    assert empirical_limit(stats, 0.025) == 98.0  # ceil(97.5)
    assert empirical_limit([3.0], 0.5) == 3.0


@settings(max_examples=100, deadline=None)
@given(
    stats=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300),
    alpha=st.floats(0.001, 0.5),
)
def test_limit_matches_counting_oracle(stats, alpha):
    lim = empirical_limit(stats, alpha)
    assert lim == empirical_limit_oracle(stats, alpha)
    # strict > flags at most floor(alpha n) observations
    assert np.sum(np.asarray(stats) > lim) <= alpha * len(stats) + 1e-9


def test_limit_errors():
    with pytest.raises(EmptyInput):
        empirical_limit([], 0.1)
    with pytest.raises(ValueError):
        empirical_limit([1.0], 1.0)


@pytest.fixture(scope="module")
def fitted(small_mfd):
    return fit_mfpca(small_mfd)


def test_t2_by_hand(fitted, small_mfd):
    comps = [0, 1, 2]
    s = project_scores(fitted, small_mfd, comps)
    np.testing.assert_allclose(t2_statistic(fitted, s, comps), (s**2 / fitted.eigenvalues[:3]).sum(axis=1))


def test_spe_dual_routes_on_training(fitted, small_mfd):
    for m in (1, 3, fitted.n_components - 1):
        comps = list(range(m))
        a = spe_statistic(fitted, small_mfd, comps)
        b = spe_from_scores(fitted, fitted.scores, comps)
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_contributions_sum_to_statistics(fitted, small_mfd):
    comps = [0, 1, 2, 3]
    ct2, cspe = contributions(fitted, small_mfd, comps)
    s = project_scores(fitted, small_mfd, comps)
    np.testing.assert_allclose(ct2.sum(axis=1), t2_statistic(fitted, s, comps), rtol=1e-10)
    np.testing.assert_allclose(cspe.sum(axis=1), spe_statistic(fitted, small_mfd, comps), rtol=1e-10)
    assert np.all(cspe >= -1e-14)


def test_sign_flip_invariance(fitted, small_mfd):
    comps = [0, 1, 2]
    signs = np.array([-1.0, 1.0, -1.0] + [1.0] * (fitted.n_components - 3))
    flipped = dataclasses.replace(
        fitted,
        eigenfunctions=fitted.eigenfunctions.with_coefs(fitted.eigenfunctions.coefs * signs[None, :, None]),
        scores=fitted.scores * signs,
    )
    a = pca_statistics(fitted, fitted.train, comps)
    b = pca_statistics(flipped, fitted.train, comps)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, atol=1e-12)


def test_contribution_points_to_shifted_variable(rng):
    t = np.linspace(0, 1, 50)

    def draw(n):
        return {v: rng.normal(size=(n, 1)) * np.sin(np.pi * t) + 0.1 * rng.normal(size=(n, 50)) for v in "PQR"}
    train = mfd_from_grid(t, draw(100), n_basis=10)
    new = draw(5)
    new["Q"] = new["Q"] + 3.0 * np.cos(3 * np.pi * t)
    newx = mfd_from_grid(t, new, n_basis=10)
    model = fit_mfpca(train)
    frame = control_charts_pca(model, newx)
    assert frame.oc_spe.all()
    assert np.all(np.argmax(frame.cont_spe, axis=1) == 1)
    assert frame.oc_cont_spe[:, 1].all()


def test_training_false_alarms(fitted, small_mfd):
    frame = control_charts_pca(fitted, small_mfd, alpha={"T2": 0.1, "spe": 0.1})
    n = len(frame)
    assert frame.oc_t2.sum() <= 0.1 * n and frame.oc_spe.sum() <= 0.1 * n
    assert frame.alpha == {"t2": 0.1, "spe": 0.1}
    with pytest.raises(ValueError):
        control_charts_pca(fitted, small_mfd, alpha={"bogus": 0.1})


def test_tuning_data_sets_limits(fitted, small_mfd):
    tun = small_mfd.subset(obs=range(20))
    frame = control_charts_pca(fitted, small_mfd, components=[0, 1], tuning=tun)
    t2_tun = t2_statistic(fitted, project_scores(fitted, tun, [0, 1]), [0, 1])
    assert frame.t2_lim == pytest.approx(empirical_limit(t2_tun, 0.025), rel=1e-12)


def test_default_components_reach_95_percent(fitted, small_mfd):
    frame = control_charts_pca(fitted, small_mfd)
    m = fitted.n_components_for(0.95)
    np.testing.assert_allclose(frame.t2, t2_statistic(fitted, fitted.scores[:, :m], list(range(m))), rtol=1e-9)


def test_strict_inequality():
    f = ChartFrame(["a", "b"], ["x"], [1.0, 2.0], [0.0, 0.0], 2.0, 0.0, [[1], [2]], [[0], [0]], [2.0], [0.0])
    assert list(f.oc_t2) == [False, False]
    assert list(f.oc_spe) == [False, False]


def make_frame(with_y):
    rng = np.random.default_rng(0)
    n = 4
    kw = dict(y=rng.normal(size=n), y_lo=-np.ones(n), y_hi=np.ones(n)) if with_y else {}
    return ChartFrame(
        ids=["a", "b", "c", "d"],
        var_names=["X1", "X2"],
        t2=rng.random(n) * 10,
        spe=rng.random(n) / 3,
        t2_lim=5.0,
        spe_lim=0.2,
        cont_t2=rng.random((n, 2)),
        cont_spe=rng.random((n, 2)),
        cont_lim_t2=np.array([0.5, 0.6]),
        cont_lim_spe=np.array([0.1, 0.2]),
        alpha={"t2": 0.025, "spe": 0.025},
        **kw,
    )


@pytest.mark.parametrize("with_y", [False, True])
def test_frame_roundtrip(tmp_path, with_y):
    f = make_frame(with_y)
    f.to_csv(tmp_path / "f.csv")
    f.to_json(tmp_path / "f.json")
    for g in (ChartFrame.read_csv(tmp_path / "f.csv"), ChartFrame.read_json(tmp_path / "f.json")):
        assert g.to_frame().equals(f.to_frame())
    assert ChartFrame.read_json(tmp_path / "f.json").alpha == f.alpha


def test_frame_columns():
    cols = list(make_frame(True).to_frame().columns)
    assert cols[:11] == ["id", "t2", "t2_lim", "spe", "spe_lim", "y", "y_lo", "y_hi", "oc_t2", "oc_spe", "oc_y"]
    assert cols[11:] == [
        "cont_t2_X1", "cont_t2_X2", "cont_spe_X1", "cont_spe_X2",
        "cont_lim_t2_X1", "cont_lim_t2_X2", "cont_lim_spe_X1", "cont_lim_spe_X2",
    ]  # fmt: skip


def test_index_of():
    f = make_frame(False)
    assert f.index_of("c") == 2
    with pytest.raises(UnknownId):
        f.index_of("zz")


def test_new_data_must_share_basis(fitted):
    other = MFD(np.zeros((7, 2, 3)), fitted.basis.__class__(0, 1, 7), var_names=fitted.var_names)
    with pytest.raises(BasisMismatch):
        control_charts_pca(fitted, other)
