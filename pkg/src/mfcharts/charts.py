"""Hotelling T^2 / SPE statistics, empirical limits, contributions and chart frames."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import EmptyInput, ShapeMismatch, UnknownId, ZeroEigenvalue
from .mfd import squared_norms_by_var
from .mfpca import _components, reconstruct, scores_of_standardized, standardize_new

PCA_ALPHA = {"t2": 0.025, "spe": 0.025}
DEFAULT_VARIANCE = 0.95


def t2_statistic(model, scores, components=None):
    """``sum_m scores_m^2 / lambda_m``; columns of ``scores`` follow ``components``."""
    comps = _components(model, components)
    lam = model.eigenvalues[comps]
    if np.any(lam <= 0):
        raise ZeroEigenvalue("T2 needs strictly positive eigenvalues")
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if scores.shape[1] != len(comps):
        raise ShapeMismatch(f"scores have {scores.shape[1]} columns for {len(comps)} components")
    return np.sum(scores**2 / lam, axis=1)


def _residual_norms(model, xs, comps, scores):
    recon = reconstruct(model, scores, comps)
    resid = xs.with_coefs(xs.coefs - recon.coefs)
    return squared_norms_by_var(resid)


def spe_statistic(model, xnew, components=None):
    """Integrated squared reconstruction error on the standardized scale."""
    comps = _components(model, components)
    xs = standardize_new(model, xnew)
    scores = scores_of_standardized(model, xs, comps)
    return _residual_norms(model, xs, comps, scores).sum(axis=1)


def spe_from_scores(model, scores_all, components=None):
    """SPE as the sum of squared scores on the components left out.

    Equals :func:`spe_statistic` when the observation lies in the span of all
    eigenfunctions (e.g. training data).
    """
    comps = set(_components(model, components))
    rest = [m for m in range(model.n_components) if m not in comps]
    scores_all = np.atleast_2d(scores_all)
    return np.sum(scores_all[:, rest] ** 2, axis=1)


def empirical_limit(stats, alpha):
    """Upper limit: the ``ceil((1 - alpha) n)``-th smallest statistic (1-based)."""
    stats = np.asarray(stats, dtype=float).ravel()
    if stats.size == 0:
        raise EmptyInput("cannot compute a limit from no statistics")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = stats.size
    rank = math.ceil(round((1 - alpha) * n, 9))
    rank = min(max(rank, 1), n)
    return float(np.sort(stats)[rank - 1])


def pca_statistics(model, xs, components):
    """T2, SPE and per-variable contributions for standardized data ``xs``.

    Returns ``(t2, spe, cont_t2, cont_spe)`` with contributions of shape
    ``(n, P)``.
    """
    comps = _components(model, components)
    psi = model.eigenfunctions.coefs[:, comps, :]
    by_var = np.einsum("kip,kl,lmp->imp", xs.coefs, model.basis.gram, psi)
    scores = by_var.sum(axis=2)
    lam = model.eigenvalues[comps]
    if np.any(lam <= 0):
        raise ZeroEigenvalue("T2 needs strictly positive eigenvalues")
    t2 = np.sum(scores**2 / lam, axis=1)
    cont_t2 = np.einsum("im,imp->ip", scores / lam, by_var)
    cont_spe = _residual_norms(model, xs, comps, scores)
    return t2, cont_spe.sum(axis=1), cont_t2, cont_spe


def contributions(model, xnew, components=None):
    """Per-variable decompositions of T2 and SPE, each ``(n, P)``."""
    _, _, cont_t2, cont_spe = pca_statistics(model, standardize_new(model, xnew), components)
    return cont_t2, cont_spe


@dataclass
class ChartFrame:
    """Monitoring record, one row per observation.

    ``y``/``y_lo``/``y_hi`` are only filled by the scalar-response scheme
    (prediction error and its per-observation limits).
    """

    ids: list
    var_names: list
    t2: np.ndarray
    spe: np.ndarray
    t2_lim: float
    spe_lim: float
    cont_t2: np.ndarray
    cont_spe: np.ndarray
    cont_lim_t2: np.ndarray
    cont_lim_spe: np.ndarray
    y: np.ndarray = None
    y_lo: np.ndarray = None
    y_hi: np.ndarray = None
    alpha: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ids)
        for name in ("t2", "spe", "y", "y_lo", "y_hi"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float).ravel()
                if val.size != n:
                    raise ShapeMismatch(f"{name} has {val.size} entries for {n} observations")
                setattr(self, name, val)
        p = len(self.var_names)
        for name in ("cont_t2", "cont_spe"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(n, p))
        for name in ("cont_lim_t2", "cont_lim_spe"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(p))
        self.t2_lim = float(self.t2_lim)
        self.spe_lim = float(self.spe_lim)
        self.ids = [str(i) for i in self.ids]

    def __len__(self):
        return len(self.ids)

    @property
    def has_y(self):
        return self.y is not None

    @property
    def oc_t2(self):
        return self.t2 > self.t2_lim

    @property
    def oc_spe(self):
        return self.spe > self.spe_lim

    @property
    def oc_y(self):
        if not self.has_y:
            return np.zeros(len(self), dtype=bool)
        return (self.y < self.y_lo) | (self.y > self.y_hi)

    @property
    def any_oc(self):
        return self.oc_t2 | self.oc_spe | self.oc_y

    @property
    def oc_cont_t2(self):
        return self.cont_t2 > self.cont_lim_t2[None, :]

    @property
    def oc_cont_spe(self):
        return self.cont_spe > self.cont_lim_spe[None, :]

    def index_of(self, obs_id):
        try:
            return self.ids.index(str(obs_id))
        except ValueError:
            raise UnknownId(f"unknown observation id {obs_id!r}") from None

    def to_frame(self):
        n = len(self)
        nan = np.full(n, np.nan)
        cols = {
            "id": self.ids,
            "t2": self.t2,
            "t2_lim": np.full(n, self.t2_lim),
            "spe": self.spe,
            "spe_lim": np.full(n, self.spe_lim),
            "y": self.y if self.has_y else nan,
            "y_lo": self.y_lo if self.has_y else nan,
            "y_hi": self.y_hi if self.has_y else nan,
            "oc_t2": self.oc_t2,
            "oc_spe": self.oc_spe,
            "oc_y": self.oc_y,
        }
        for j, v in enumerate(self.var_names):
            cols[f"cont_t2_{v}"] = self.cont_t2[:, j]
        for j, v in enumerate(self.var_names):
            cols[f"cont_spe_{v}"] = self.cont_spe[:, j]
        for j, v in enumerate(self.var_names):
            cols[f"cont_lim_t2_{v}"] = np.full(n, self.cont_lim_t2[j])
        for j, v in enumerate(self.var_names):
            cols[f"cont_lim_spe_{v}"] = np.full(n, self.cont_lim_spe[j])
        return pd.DataFrame(cols)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def to_dict(self):
        frame = self.to_frame()
        rows = []
        for rec in frame.to_dict(orient="records"):
            out = {}
            for k, v in rec.items():
                if isinstance(v, (bool, np.bool_)):
                    out[k] = bool(v)
                elif isinstance(v, (float, np.floating)):
                    out[k] = None if np.isnan(v) else float(v)
                else:
                    out[k] = v
            rows.append(out)
        return {"var_names": list(self.var_names), "alpha": dict(self.alpha), "rows": rows}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_frame(cls, frame, var_names=None, alpha=None):
        if var_names is None:
            var_names = [c[len("cont_t2_") :] for c in frame.columns if c.startswith("cont_t2_")]
        y = frame["y"].to_numpy(dtype=float)
        has_y = not np.all(np.isnan(y))
        first = frame.iloc[0] if len(frame) else None
        return cls(
            ids=[str(i) for i in frame["id"]],
            var_names=list(var_names),
            t2=frame["t2"].to_numpy(dtype=float),
            spe=frame["spe"].to_numpy(dtype=float),
            t2_lim=float(first["t2_lim"]),
            spe_lim=float(first["spe_lim"]),
            cont_t2=frame[[f"cont_t2_{v}" for v in var_names]].to_numpy(dtype=float),
            cont_spe=frame[[f"cont_spe_{v}" for v in var_names]].to_numpy(dtype=float),
            cont_lim_t2=np.array([float(first[f"cont_lim_t2_{v}"]) for v in var_names]),
            cont_lim_spe=np.array([float(first[f"cont_lim_spe_{v}"]) for v in var_names]),
            y=y if has_y else None,
            y_lo=frame["y_lo"].to_numpy(dtype=float) if has_y else None,
            y_hi=frame["y_hi"].to_numpy(dtype=float) if has_y else None,
            alpha=alpha or {},
        )

    @classmethod
    def read_csv(cls, path):
        return cls.from_frame(pd.read_csv(path, dtype={"id": str}, float_precision="round_trip"))

    @classmethod
    def read_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        frame = pd.DataFrame(doc["rows"])
        for c in frame.columns:
            if c != "id" and not c.startswith("oc_"):
                frame[c] = frame[c].astype(float)
        return cls.from_frame(frame, doc["var_names"], doc.get("alpha"))


def _alpha(alpha, defaults):
    out = dict(defaults)
    if alpha:
        for k, v in alpha.items():
            key = k.lower()
            if key not in defaults:
                raise ValueError(f"unknown chart {k!r} in alpha; expected {sorted(defaults)}")
            out[key] = float(v)
    for k, v in out.items():
        if not 0 < v < 1:
            raise ValueError(f"alpha[{k!r}] must lie in (0, 1), got {v}")
    return out


def pca_limits(model, comps, alpha, tuning=None):
    """Limits of T2, SPE and contributions from tuning data or, failing that, training data."""
    ref = model.train if tuning is None else standardize_new(model, tuning)
    t2, spe, ct2, cspe = pca_statistics(model, ref, comps)
    return {
        "t2_lim": empirical_limit(t2, alpha["t2"]),
        "spe_lim": empirical_limit(spe, alpha["spe"]),
        "cont_lim_t2": np.array([empirical_limit(ct2[:, j], alpha["t2"]) for j in range(ct2.shape[1])]),
        "cont_lim_spe": np.array([empirical_limit(cspe[:, j], alpha["spe"]) for j in range(cspe.shape[1])]),
    }


def control_charts_pca(model, newdata, components=None, tuning=None, alpha=None, limits=None):
    """Phase-II T2 and SPE charts for multivariate functional data.

    Parameters
    ----------
    model : PCAModel
    newdata : MFD
        Observations to monitor (raw scale).
    components : sequence of int, optional
        0-based components; default is the fewest explaining 95% of variance.
    tuning : MFD, optional
        In-control data for the limits; training data when omitted.
    alpha : dict, optional
        Per-chart Type-I rates, default ``{"t2": 0.025, "spe": 0.025}``.
    limits : dict, optional
        Precomputed output of :func:`pca_limits` (skips recomputation).
    """
    alpha = _alpha(alpha, PCA_ALPHA)
    comps = model.components_for(DEFAULT_VARIANCE) if components is None else _components(model, components)
    if not comps:
        raise ShapeMismatch("at least one component is required")
    if limits is None:
        limits = pca_limits(model, comps, alpha, tuning)
    t2, spe, ct2, cspe = pca_statistics(model, standardize_new(model, newdata), comps)
    return ChartFrame(
        ids=newdata.obs_ids,
        var_names=model.var_names,
        t2=t2,
        spe=spe,
        cont_t2=ct2,
        cont_spe=cspe,
        alpha=alpha,
        **limits,
    )
