"""Deterministic static SVG figures.

Every panel is 900 x 300 and panels stack vertically. Control limits are
dashed, out-of-control marks carry the ``oc`` class, and each mark keeps
its exact value in a ``data-value`` attribute (labels show 4 significant
digits).
"""

import numpy as np

PANEL_W = 900
PANEL_H = 300
MARGIN = {"left": 70, "right": 20, "top": 30, "bottom": 40}

STYLE = (
    ".axis{stroke:#000;stroke-width:1}"
    ".ic{fill:#333;stroke:#333}"
    ".oc{fill:#d62728;stroke:#d62728}"
    ".limit{stroke:#000;stroke-width:1;stroke-dasharray:6,4;fill:none}"
    ".line{fill:none;stroke:#555;stroke-width:1}"
    ".ref{fill:none;stroke:#bbb;stroke-width:0.8}"
    ".bar{fill:#999}"
    ".bar.oc{fill:#d62728}"
    "text{font-family:sans-serif;font-size:11px}"
    ".title{font-size:13px}"
)

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22")


def label(v):
    return f"{v:.4g}"


def _c(v):
    return f"{v:.2f}"


def _exact(v):
    return "%.17g" % v


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


class Panel:
    """One plotting area with linear x/y scales."""

    def __init__(self, title, xlim, ylim, xlabel="", ylabel=""):
        self.title = title
        self.xlim = self._pad(xlim, 0.0)
        self.ylim = self._pad(ylim, 0.05)
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.items = []

    @staticmethod
    def _pad(lim, frac):
        lo, hi = float(lim[0]), float(lim[1])
        if not np.isfinite(lo) or not np.isfinite(hi):
            lo, hi = 0.0, 1.0
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        span = hi - lo
        return lo - frac * span, hi + frac * span

    def x(self, v):
        lo, hi = self.xlim
        w = PANEL_W - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (v - lo) / (hi - lo) * w

    def y(self, v):
        lo, hi = self.ylim
        h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
        return MARGIN["top"] + h - (v - lo) / (hi - lo) * h

    def polyline(self, xs, ys, cls="line", color=None, name=None):
        pts = " ".join(f"{_c(self.x(a))},{_c(self.y(b))}" for a, b in zip(xs, ys))
        style = f' style="stroke:{color}"' if color else ""
        data = f' data-name="{_esc(name)}"' if name is not None else ""
        self.items.append(f'<polyline class="{cls}"{style}{data} points="{pts}"/>')

    def hline(self, v, cls="limit", name=None):
        data = f' data-name="{_esc(name)}"' if name else ""
        self.items.append(
            f'<line class="{cls}"{data} data-value="{_exact(v)}" x1="{_c(self.x(self.xlim[0]))}" '
            f'y1="{_c(self.y(v))}" x2="{_c(self.x(self.xlim[1]))}" y2="{_c(self.y(v))}"/>'
        )
        self.items.append(
            f'<text x="{_c(PANEL_W - MARGIN["right"] - 2)}" y="{_c(self.y(v) - 3)}" '
            f'text-anchor="end">{label(v)}</text>'
        )

    def point(self, xv, yv, oc=False, name=None):
        cls = "oc" if oc else "ic"
        data = f' data-id="{_esc(name)}"' if name is not None else ""
        self.items.append(
            f'<circle class="{cls}"{data} data-value="{_exact(yv)}" cx="{_c(self.x(xv))}" '
            f'cy="{_c(self.y(yv))}" r="3"/>'
        )
        if oc and name is not None:
            self.items.append(f'<text x="{_c(self.x(xv))}" y="{_c(self.y(yv) - 6)}" text-anchor="middle">{_esc(name)}</text>')

    def bar(self, xv, width, value, oc=False, name=None):
        base = max(min(0.0, self.ylim[1]), self.ylim[0])
        y0, y1 = self.y(base), self.y(value)
        top, h = min(y0, y1), abs(y1 - y0)
        cls = "bar oc" if oc else "bar"
        self.items.append(
            f'<rect class="{cls}" data-name="{_esc(name)}" data-value="{_exact(value)}" '
            f'x="{_c(self.x(xv - width / 2))}" y="{_c(top)}" width="{_c(self.x(xv + width / 2) - self.x(xv - width / 2))}" '
            f'height="{_c(h)}"/>'
        )
        self.items.append(
            f'<text x="{_c(self.x(xv))}" y="{_c(PANEL_H - MARGIN["bottom"] + 14)}" text-anchor="middle">{_esc(name)}</text>'
        )

    def rule(self, x0, x1, v, name=None):
        data = f' data-name="{_esc(name)}"' if name else ""
        self.items.append(
            f'<line class="limit"{data} data-value="{_exact(v)}" x1="{_c(self.x(x0))}" y1="{_c(self.y(v))}" '
            f'x2="{_c(self.x(x1))}" y2="{_c(self.y(v))}"/>'
        )

    def cell(self, x0, x1, y0, y1, value, color):
        self.items.append(
            f'<rect data-value="{_exact(value)}" x="{_c(self.x(x0))}" y="{_c(self.y(y1))}" '
            f'width="{_c(self.x(x1) - self.x(x0))}" height="{_c(self.y(y0) - self.y(y1))}" fill="{color}"/>'
        )

    def _axes(self, xticks=True):
        out = []
        l, r = MARGIN["left"], PANEL_W - MARGIN["right"]
        t, b = MARGIN["top"], PANEL_H - MARGIN["bottom"]
        out.append(f'<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}"/>')
        out.append(f'<line class="axis" x1="{l}" y1="{t}" x2="{l}" y2="{b}"/>')
        for v in np.linspace(*self.ylim, 5):
            out.append(f'<text x="{l - 4}" y="{_c(self.y(v) + 4)}" text-anchor="end">{label(v)}</text>')
        if xticks:
            for v in np.linspace(*self.xlim, 5):
                out.append(f'<text x="{_c(self.x(v))}" y="{b + 14}" text-anchor="middle">{label(v)}</text>')
        out.append(f'<text class="title" x="{l}" y="{t - 10}">{_esc(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{_c((l + r) / 2)}" y="{b + 30}" text-anchor="middle">{_esc(self.xlabel)}</text>')
        if self.ylabel:
            out.append(
                f'<text x="14" y="{_c((t + b) / 2)}" text-anchor="middle" '
                f'transform="rotate(-90 14 {_c((t + b) / 2)})">{_esc(self.ylabel)}</text>'
            )
        return out

    def render(self, offset, xticks=True):
        body = "\n".join(self._axes(xticks) + self.items)
        return f'<g class="panel" transform="translate(0,{offset})">\n{body}\n</g>'


def document(panels, xticks=True):
    height = PANEL_H * len(panels)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" '
        f'viewBox="0 0 {PANEL_W} {height}">',
        f"<style>{STYLE}</style>",
        f'<rect x="0" y="0" width="{PANEL_W}" height="{height}" fill="#fff"/>',
    ]
    for i, p in enumerate(panels):
        parts.append(p.render(i * PANEL_H, xticks))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _range(*arrays):
    vals = np.concatenate([np.ravel(np.asarray(a, dtype=float)) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def render_curves(panels_data, max_curves=None):
    """``panels_data``: list of ``(name, grid, values (n, g), ids)``."""
    panels = []
    for name, grid, values, ids in panels_data:
        values = values if max_curves is None else values[:max_curves]
        ids = ids if max_curves is None else ids[:max_curves]
        p = Panel(name, _range(grid), _range(values), "t", name)
        for j, (row, i) in enumerate(zip(values, ids)):
            p.polyline(grid, row, color=PALETTE[j % len(PALETTE)], name=i)
        panels.append(p)
    return document(panels)


def render_eigenfunctions(pca, harm=(0, 1), n_points=200):
    basis = pca.basis
    t = np.linspace(basis.domain_lo, basis.domain_hi, n_points)
    vals = pca.eigenfunctions.evaluate(t)  # (g, m, P)
    harm = [h for h in harm if h < pca.n_components]
    panels = []
    for p, var in enumerate(pca.var_names):
        sub = vals[:, harm, p]
        panel = Panel(var, _range(t), _range(sub), "t", var)
        for j, h in enumerate(harm):
            panel.polyline(t, sub[:, j], color=PALETTE[j % len(PALETTE)], name=f"PC{h + 1}")
        panels.append(panel)
    return document(panels)


def render_charts(frame):
    """One panel per statistic: T2, SPE and, when present, the prediction error."""
    n = len(frame)
    xs = np.arange(1, n + 1)
    panels = []
    specs = [("Hotelling T2", frame.t2, frame.t2_lim, None, frame.oc_t2), ("SPE", frame.spe, frame.spe_lim, None, frame.oc_spe)]
    if frame.has_y:
        specs.append(("Prediction error", frame.y, frame.y_hi, frame.y_lo, frame.oc_y))
    for title, stat, hi, lo, oc in specs:
        lims = [np.atleast_1d(hi)] + ([np.atleast_1d(lo)] if lo is not None else [])
        p = Panel(title, (0.5, n + 0.5), _range(stat, *lims), "observation", title)
        if np.ndim(hi) == 0:
            p.hline(hi, name="upper")
        else:
            p.polyline(xs, hi, cls="limit", name="upper")
            p.polyline(xs, lo, cls="limit", name="lower")
        for i in range(n):
            p.point(xs[i], stat[i], bool(oc[i]), frame.ids[i])
        panels.append(p)
    return document(panels, xticks=True)


def render_contributions(frame, obs_id):
    i = frame.index_of(obs_id)
    panels = []
    for title, cont, lim, oc in (
        ("Contribution to T2", frame.cont_t2[i], frame.cont_lim_t2, frame.oc_cont_t2[i]),
        ("Contribution to SPE", frame.cont_spe[i], frame.cont_lim_spe, frame.oc_cont_spe[i]),
    ):
        p_n = len(frame.var_names)
        lo, hi = _range(cont, lim, [0.0])
        p = Panel(f"{title} (observation {obs_id})", (0.5, p_n + 0.5), (lo, hi), "", "contribution")
        for j, var in enumerate(frame.var_names):
            p.bar(j + 1, 0.6, cont[j], bool(oc[j]), var)
            p.rule(j + 0.6, j + 1.4, lim[j], name=f"limit {var}")
        panels.append(p)
    return document(panels, xticks=False)


def render_monitor_overlay(reference, new, obs_id, oc, n_points=200, max_reference=100):
    """Reference curves in grey and the monitored observation on top, per variable.

    Only the first ``max_reference`` reference curves are drawn.
    """
    basis = reference.basis
    t = np.linspace(basis.domain_lo, basis.domain_hi, n_points)
    ref = reference.evaluate(t)[:, :max_reference, :]
    j = new.obs_ids.index(str(obs_id))
    cur = new.evaluate(t)[:, j, :]
    panels = []
    for p, var in enumerate(reference.var_names):
        panel = Panel(f"{var} (observation {obs_id})", _range(t), _range(ref[:, :, p], cur[:, p]), "t", var)
        for i in range(ref.shape[1]):
            panel.polyline(t, ref[:, i, p], cls="ref")
        panel.polyline(t, cur[:, p], cls="oc line" if oc else "ic line", name=obs_id)
        panels.append(panel)
    return document(panels)


def _color(v, vmax):
    # diverging blue-white-red
    z = 0.0 if vmax == 0 else max(-1.0, min(1.0, v / vmax))
    if z >= 0:
        r, g, b = 255, int(round(255 * (1 - z))), int(round(255 * (1 - z)))
    else:
        r, g, b = int(round(255 * (1 + z))), int(round(255 * (1 + z))), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_beta_surface(s, t, surfaces, var_names):
    panels = []
    vmax = float(np.max(np.abs(surfaces))) if surfaces.size else 0.0
    ds = (s[-1] - s[0]) / (len(s) - 1) if len(s) > 1 else 1.0
    dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
    for p, var in enumerate(var_names):
        panel = Panel(f"beta {var}(s, t)", (s[0] - ds / 2, s[-1] + ds / 2), (t[0] - dt / 2, t[-1] + dt / 2), "s", "t")
        panel.ylim = (t[0] - dt / 2, t[-1] + dt / 2)
        for a, sv in enumerate(s):
            for b, tv in enumerate(t):
                v = surfaces[p, a, b]
                panel.cell(sv - ds / 2, sv + ds / 2, tv - dt / 2, tv + dt / 2, v, _color(v, vmax))
        panels.append(panel)
    return document(panels)


def render_realtime_path(path, obs_id):
    """``path``: DataFrame with ``k, statistic, value, limit, oc``."""
    panels = []
    titles = {"t2": "Hotelling T2", "spe": "SPE", "y": "Prediction error"}
    for stat in ("t2", "spe", "y"):
        sub = path[path["statistic"] == stat]
        if sub.empty:
            continue
        k = sub["k"].to_numpy(dtype=float)
        val = sub["value"].to_numpy(dtype=float)
        lim = sub["limit"].to_numpy(dtype=float)
        lims = [lim, -lim] if stat == "y" else [lim]
        p = Panel(f"{titles[stat]} (observation {obs_id})", _range(k), _range(val, *lims), "k", titles[stat])
        p.polyline(k, lim, cls="limit", name="upper")
        if stat == "y":
            p.polyline(k, -lim, cls="limit", name="lower")
        p.polyline(k, val, cls="line", name=str(obs_id))
        for kv, v, o in zip(k, val, sub["oc"].to_numpy(dtype=bool)):
            p.point(kv, v, bool(o))
        panels.append(p)
    return document(panels)
