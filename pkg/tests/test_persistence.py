import json

import numpy as np
import pytest

from mfcharts.archive import SCHEMA_VERSION, from_document, load_model, save_model, to_document
from mfcharts.charts import control_charts_pca
from mfcharts.errors import InvalidConfig, IoError, KindMismatch, SchemaVersionMismatch
from mfcharts.files import (
    read_long,
    read_scalar,
    read_wide,
    read_wide_set,
    write_dataset,
    write_long,
    write_scalar,
    write_wide,
)
from mfcharts.fof import fit_fof_pc, regr_cc_fof
from mfcharts.mfpca import fit_mfpca
from mfcharts.simgen import SimConfig, simulate_mfd
from mfcharts.sof import control_charts_sof_pc, fit_sof_pc


def frames_equal(a, b):
    for name in ("t2", "spe", "cont_t2", "cont_spe", "cont_lim_t2", "cont_lim_spe"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.t2_lim == b.t2_lim and a.spe_lim == b.spe_lim
    if a.has_y:
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.y_hi, b.y_hi)


@pytest.mark.parametrize("kind", ["pca", "sof", "fof"])
def test_roundtrip_is_bit_exact(tmp_path, sim_small_mfd, kind):
    d = sim_small_mfd
    if kind == "pca":
        pca = fit_mfpca(d["x"])
        model = (pca, pca.components_for(0.95))
        run = lambda m: control_charts_pca(m[0], d["xt"], m[1])  # noqa: E731
    elif kind == "sof":
        model = fit_sof_pc(d["ys"], d["x"])
        run = lambda m: control_charts_sof_pc(m, d["xt"], d["yst"])  # noqa: E731
    else:
        model = fit_fof_pc(d["y"], d["x"], residual_type="studentized")
        run = lambda m: regr_cc_fof(m, d["yt"], d["xt"])  # noqa: E731
    path = tmp_path / "m.json"
    save_model(model, path, meta={"note": "x"})
    got_kind, loaded, meta = load_model(path)
    assert got_kind == kind and meta == {"note": "x"}
    frames_equal(run(model), run(loaded))


def test_schema_checks(tmp_path, small_mfd):
    pca = fit_mfpca(small_mfd)
    doc = to_document((pca, [0]))
    assert doc["schema_version"] == SCHEMA_VERSION
    bad = dict(doc, schema_version="0.9")
    with pytest.raises(SchemaVersionMismatch):
        from_document(bad)
    with pytest.raises(KindMismatch):
        from_document(dict(doc, schema="other"))
    with pytest.raises(KindMismatch):
        from_document(dict(doc, kind="tree"))
    with pytest.raises(KindMismatch):
        to_document(pca)  # a bare PCAModel needs its components
    p = tmp_path / "x.json"
    p.write_text("[1, 2]")
    with pytest.raises(KindMismatch):
        load_model(p)
    p.write_text("{not json")
    with pytest.raises(KindMismatch):
        load_model(p)
    with pytest.raises(IoError):
        load_model(tmp_path / "missing.json")


def test_archive_has_explicit_shapes(tmp_path, small_mfd):
    pca = fit_mfpca(small_mfd)
    save_model((pca, [0, 1]), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    ev = doc["model"]["pca"]["eigenvalues"]
    assert ev["shape"] == [pca.n_components] and len(ev["data"]) == pca.n_components
    coefs = doc["model"]["pca"]["train"]["coefs"]
    assert coefs["shape"] == list(pca.train.coefs.shape)


def test_wide_scalar_long_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    grid = np.linspace(0, 1, 7) / 3
    vals = rng.normal(size=(3, 7))
    write_wide(tmp_path / "w.csv", ["a", "b", "c"], grid, vals)
    ids, g, v = read_wide(tmp_path / "w.csv")
    assert ids == ["a", "b", "c"]
    np.testing.assert_array_equal(g, grid)
    np.testing.assert_array_equal(v, vals)
    write_scalar(tmp_path / "s.csv", ids, vals[:, 0])
    sid, sv = read_scalar(tmp_path / "s.csv")
    assert sid == ids
    np.testing.assert_array_equal(sv, vals[:, 0])
    write_long(tmp_path / "l.csv", ids, grid, {"u": vals, "v": 2 * vals})
    frame = read_long(tmp_path / "l.csv", ["u", "v"])
    assert list(frame.columns) == ["id", "arg", "u", "v"]
    np.testing.assert_array_equal(frame["v"].to_numpy(), 2 * vals.ravel())
    with pytest.raises(InvalidConfig):
        read_long(tmp_path / "l.csv", ["w"])
    with pytest.raises(IoError):
        read_wide(tmp_path / "nope.csv")


def test_dataset_files(tmp_path):
    ds = simulate_mfd(SimConfig(nobs=4, seed=1))
    paths = write_dataset(str(tmp_path / "d"), ds)
    assert sorted(paths) == ["X1", "X2", "X3", "Y", "y_scalar"]
    ids, grid, vals = read_wide_set(str(tmp_path / "d"), ["X1", "Y"])
    assert ids == ["1", "2", "3", "4"]
    np.testing.assert_array_equal(vals["Y"], ds.Y)
    np.testing.assert_array_equal(grid, ds.grid)
    with pytest.raises(InvalidConfig):
        read_wide_set(str(tmp_path / "d"), ["X9"])
