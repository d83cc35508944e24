import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mfcharts import render
from mfcharts.charts import ChartFrame, control_charts_pca
from mfcharts.fof import fit_fof_pc
from mfcharts.mfpca import fit_mfpca, standardize_new
from mfcharts.realtime import real_time_path

NS = {"s": "http://www.w3.org/2000/svg"}


def parse(text):
    root = ET.fromstring(text)
    return root, root.findall("s:g[@class='panel']", NS)


@pytest.fixture(scope="module")
def pca(small_mfd):
    return fit_mfpca(small_mfd)


def frame_with_y(n=6):
    rng = np.random.default_rng(1)
    y = rng.normal(size=n)
    y[2] = 5.0
    return ChartFrame(
        ids=[str(i) for i in range(n)],
        var_names=["A", "B"],
        t2=rng.random(n),
        spe=rng.random(n),
        t2_lim=0.9,
        spe_lim=0.5,
        cont_t2=rng.random((n, 2)),
        cont_spe=rng.random((n, 2)),
        cont_lim_t2=[0.5, 0.5],
        cont_lim_spe=[0.5, 0.5],
        y=y,
        y_lo=-np.full(n, 2.0),
        y_hi=np.full(n, 2.0),
    )


def test_chart_panels_and_marks(pca, small_mfd):
    frame = control_charts_pca(pca, small_mfd, alpha={"t2": 0.2, "spe": 0.2})
    root, panels = parse(render.render_charts(frame))
    assert len(panels) == 2
    assert root.get("width") == "900" and root.get("height") == "600"
    t2_marks = panels[0].findall("s:circle", NS)
    assert len(t2_marks) == len(frame)
    assert sum(c.get("class") == "oc" for c in t2_marks) == frame.oc_t2.sum()
    assert [float(c.get("data-value")) for c in t2_marks] == list(frame.t2)
    limit = panels[0].find("s:line[@class='limit']", NS)
    assert float(limit.get("data-value")) == frame.t2_lim


def test_three_panels_with_response():
    frame = frame_with_y()
    _, panels = parse(render.render_charts(frame))
    assert len(panels) == 3
    marks = panels[2].findall("s:circle", NS)
    assert [c.get("class") for c in marks].count("oc") == 1
    assert len(panels[2].findall("s:polyline[@class='limit']", NS)) == 2


def test_contributions():
    frame = frame_with_y()
    _, panels = parse(render.render_contributions(frame, "3"))
    assert len(panels) == 2
    bars = panels[0].findall("s:rect", NS)
    assert [float(b.get("data-value")) for b in bars] == list(frame.cont_t2[3])
    assert sum("oc" in b.get("class") for b in bars) == frame.oc_cont_t2[3].sum()


def test_curves_eigenfunctions_overlay(pca, small_mfd):
    grid = np.linspace(0, 1, 30)
    vals = small_mfd.evaluate(grid)
    text = render.render_curves([("A", grid, vals[:, :, 0].T, small_mfd.obs_ids)], max_curves=5)
    _, panels = parse(text)
    assert len(panels[0].findall("s:polyline", NS)) == 5
    _, panels = parse(render.render_eigenfunctions(pca, harm=(0, 2)))
    assert len(panels) == 3 and len(panels[0].findall("s:polyline", NS)) == 2
    text = render.render_monitor_overlay(pca.train, standardize_new(pca, small_mfd), "4", oc=True, max_reference=10)
    _, panels = parse(text)
    assert len(panels) == 3
    assert len(panels[0].findall("s:polyline[@class='ref']", NS)) == 10
    assert len(panels[0].findall("s:polyline[@class='oc line']", NS)) == 1


def test_beta_surface_and_path(sim_small_mfd):
    m = fit_fof_pc(sim_small_mfd["y"], sim_small_mfd["x"])
    s = t = np.linspace(0, 1, 6)
    _, panels = parse(render.render_beta_surface(s, t, m.beta_surface(s, t), m.pca_x.var_names))
    assert len(panels) == 3 and len(panels[0].findall("s:rect", NS)) == 36
    frames = {0.5: frame_with_y(), 1.0: frame_with_y()}
    _, panels = parse(render.render_realtime_path(real_time_path(frames, "2"), "2"))
    assert len(panels) == 3


def test_deterministic(pca, small_mfd):
    frame = control_charts_pca(pca, small_mfd)
    assert render.render_charts(frame) == render.render_charts(frame)


def test_escaping():
    assert render._esc('<a&"b">') == "&lt;a&amp;&quot;b&quot;&gt;"
