import json
import subprocess
import sys

import pytest

from mfcharts.charts import ChartFrame
from mfcharts.cli import main

SMALL = {"nobs_I": 60, "nobs_tun": 40, "nobs_II": 30, "n_basis": 12}


def write_params(path, **kw):
    path.write_text(json.dumps({**SMALL, **kw}))
    return str(path)


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    params = write_params(root / "p.json")
    assert main(["simulate", "--params", params, "--seed", "0", "--out", str(root / "sim")]) == 0
    return root, params


def fit(root, params, mode, name=None):
    out = str(root / "models")
    code = main(["fit", "--params", params, "--mode", mode, "--data", str(root / "sim" / "datI"), "--out", out, "--name", name or mode])
    assert code == 0
    return f"{out}/{name or mode}.json"


def test_simulate_is_byte_identical(tmp_path, sim):
    root, params = sim
    assert main(["simulate", "--params", params, "--seed", "0", "--out", str(tmp_path)]) == 0
    for name in ("datII_X3.csv", "datI_y_scalar.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (root / "sim" / name).read_bytes()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["sizes"] == {"nobs_I": 60, "nobs_tun": 40, "nobs_II": 30}
    assert manifest["phase_II_groups"][2]["rows"] == [21, 30]


@pytest.mark.parametrize("mode", ["pca", "sof", "fof"])
def test_fit_monitor_render(tmp_path, sim, mode, capsys):
    root, params = sim
    model = fit(root, params, mode)
    args = ["monitor", "--params", params, "--model", model, "--data", str(root / "sim" / "datII"), "--out", str(tmp_path)]
    args += ["--tuning", str(root / "sim" / "datI_tun")]
    assert main(args) == 0
    assert main(args + ["--fail-on-oc"]) == 2  # the last third is strongly shifted
    frame = ChartFrame.read_csv(str(tmp_path / "chart.csv"))
    assert len(frame) == 30 and frame.has_y == (mode == "sof")
    assert ChartFrame.read_json(str(tmp_path / "chart.json")).t2_lim == frame.t2_lim
    capsys.readouterr()
    render = ["render", "--kind", "charts", "--input", str(tmp_path / "chart.csv"), "--out", str(tmp_path)]
    assert main(render) == 0
    first = (tmp_path / "charts.svg").read_bytes()
    assert main(render) == 0
    assert (tmp_path / "charts.svg").read_bytes() == first
    assert first.count(b'<g class="panel"') == (3 if mode == "sof" else 2)
    assert main(["render", "--kind", "contributions", "--input", str(tmp_path / "chart.json"), "--id", "25", "--out", str(tmp_path)]) == 0
    overlay = ["render", "--kind", "monitor-overlay", "--input", model, "--new", str(root / "sim" / "datII"), "--id", "25"]
    assert main(overlay + ["--frame", str(tmp_path / "chart.csv"), "--out", str(tmp_path)]) == 0
    assert b'class="oc line"' in (tmp_path / "monitor-overlay.svg").read_bytes()
    assert main(["render", "--kind", "eigenfunctions", "--input", model, "--harm", "1,2", "--out", str(tmp_path)]) == 0
    if mode == "fof":
        assert main(["render", "--kind", "beta-surface", "--input", model, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "beta-surface.csv").exists()
    else:
        assert main(["render", "--kind", "beta-surface", "--input", model, "--out", str(tmp_path)]) == 1


def test_realtime(tmp_path, sim, capsys):
    root, _ = sim
    params = write_params(tmp_path / "p.json", k_seq=[0.5, 1.0])
    base = ["realtime", "--params", params, "--mode", "sof", "--data", str(root / "sim" / "datI")]
    base += ["--new", str(root / "sim" / "datII"), "--out", str(tmp_path)]
    assert main(base + ["--id", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["k_seq"] == [0.5, 1.0]
    assert set(out["written"]) == {"realtime_k0.5.csv", "realtime_k1.csv", "realtime_paths.csv", "realtime_path_3.csv"}
    assert main(base + ["--id", "nope"]) == 1
    assert main(["render", "--kind", "realtime-path", "--input", str(tmp_path / "realtime_paths.csv"), "--id", "3", "--out", str(tmp_path)]) == 0
    assert main(["render", "--kind", "realtime-path", "--input", str(tmp_path / "realtime_paths.csv"), "--out", str(tmp_path)]) == 1
    assert main(["render", "--kind", "realtime-path", "--input", str(tmp_path / "realtime_paths.csv"), "--id", "x", "--out", str(tmp_path)]) == 1


def test_config_errors(tmp_path, sim, capsys):
    root, params = sim
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_basis": 12, "nbasis": 3}))
    assert main(["simulate", "--params", str(bad), "--out", str(tmp_path)]) == 1
    assert "unknown parameter keys ['nbasis']" in capsys.readouterr().err
    assert main(["fit", "--mode", "pca", "--out", str(tmp_path)]) == 1  # no data
    assert main(["fit", "--params", str(tmp_path / "none.json"), "--mode", "pca", "--data", "x"]) == 1
    model = fit(root, params, "pca")
    # a different basis size at monitoring time cannot be scored against the archive
    other = write_params(tmp_path / "o.json", n_basis=14)
    code = main(["monitor", "--params", other, "--model", model, "--data", str(root / "sim" / "datII"), "--out", str(tmp_path)])
    assert code == 1
    assert "BasisMismatch" in capsys.readouterr().err
    # a chart frame is not a model archive
    (tmp_path / "f.json").write_text(json.dumps({"rows": []}))
    assert main(["monitor", "--model", str(tmp_path / "f.json"), "--data", str(root / "sim" / "datII")]) == 1
    assert "KindMismatch" in capsys.readouterr().err
    assert main(["render", "--kind", "charts", "--input", model, "--out", str(tmp_path)]) == 1


def test_numeric_failure_exit_code(tmp_path, sim):
    root, _ = sim
    # one variable that is zero everywhere cannot be standardized
    src = (root / "sim" / "datI_X1.csv").read_text().splitlines()
    head, rows = src[0], src[1:]
    zero = [r.split(",")[0] + "," + ",".join("0" for _ in r.split(",")[1:]) for r in rows]
    (tmp_path / "z_X1.csv").write_text("\n".join([head, *zero]) + "\n")
    params = write_params(tmp_path / "p.json", vars=["X1"])
    assert main(["fit", "--params", params, "--mode", "pca", "--data", str(tmp_path / "z"), "--out", str(tmp_path)]) == 3


def test_usage_error_and_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mfcharts.cli", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1
    proc = subprocess.run([sys.executable, "-m", "mfcharts.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
