"""Real-time monitoring on domains truncated to ``(a, a + k (b - a))``.

For every fraction ``k`` the raw points inside the truncated domain are
re-smoothed on a basis of the same size, a model is fitted on the truncated
reference data and new observations are charted against it. No
multiplicity correction is applied across the ``k`` sequence.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .charts import control_charts_pca
from .errors import InsufficientPoints, MfchartsError, ShapeMismatch
from .fof import fit_fof_pc, regr_cc_fof
from .mfd import mfd_from_grid, mfd_from_long, records_to_frame
from .mfpca import fit_mfpca
from .sof import control_charts_sof_pc, fit_sof_pc

MODES = ("pca", "sof", "fof")
DEFAULT_K = tuple(np.round(np.arange(2, 11) / 10, 10))


def default_k_seq():
    return np.array(DEFAULT_K)


def _check_k(k_seq):
    k = np.asarray(default_k_seq() if k_seq is None else k_seq, dtype=float).ravel()
    if k.size == 0 or np.any(k <= 0) or np.any(k > 1) or np.any(np.diff(k) <= 0):
        raise ValueError("k_seq must be strictly increasing fractions in (0, 1]")
    return [float(v) for v in k]


def _upper(lo, hi, k):
    return hi if k == 1.0 else lo + k * (hi - lo)


def _with_k(exc, k):
    # re-raise an error of the same type with the fraction attached
    msg = f"k={k:g}: {exc}"
    if isinstance(exc, InsufficientPoints):
        return InsufficientPoints(msg, obs_id=exc.obs_id, var=exc.var, k=k)
    try:
        return type(exc)(msg)
    except TypeError:
        return exc


def truncate_grid(grid, data, k_seq=None, n_basis=30, lambda_grid=None, domain=None, obs_ids=None):
    """Family ``k -> MFD`` from curves observed on one common grid."""
    grid = np.asarray(grid, dtype=float).ravel()
    lo, hi = (grid.min(), grid.max()) if domain is None else domain
    slack = 1e-10 * (hi - lo)
    out = {}
    for k in _check_k(k_seq):
        top = _upper(lo, hi, k)
        keep = grid <= top + slack
        if keep.sum() < n_basis:
            raise InsufficientPoints(
                f"k={k:g}: {int(keep.sum())} grid points in [{lo}, {top}], need at least {n_basis}", k=k
            )
        sub = {name: np.asarray(m)[:, keep] for name, m in data.items()}
        try:
            out[k] = mfd_from_grid(grid[keep], sub, n_basis, lambda_grid, domain=(lo, top), obs_ids=obs_ids)
        except MfchartsError as exc:
            raise _with_k(exc, k) from exc
    return out


def truncate_long(records, domain, k_seq=None, n_basis=30, lambda_grid=None, variables=None, n_jobs=1):
    """Family ``k -> MFD`` from long-format records (each curve on its own grid)."""
    df, variables = records_to_frame(records, variables)
    lo, hi = domain
    slack = 1e-10 * (hi - lo)
    out = {}
    for k in _check_k(k_seq):
        top = _upper(lo, hi, k)
        sub = df.loc[df["arg"] <= top + slack]
        missing = set(df["id"]) - set(sub["id"])
        if missing:
            first = next(i for i in pd.unique(df["id"]) if i in missing)
            raise InsufficientPoints(f"k={k:g}: observation {first!r} has no points", obs_id=first, k=k)
        try:
            out[k] = mfd_from_long(sub, (lo, top), n_basis, lambda_grid, variables, n_jobs)
        except MfchartsError as exc:
            raise _with_k(exc, k) from exc
    return out


def truncate_family(source, k_seq=None, n_basis=30, lambda_grid=None, domain=None, **kwargs):
    """Dispatch on ``source``: a long DataFrame / record list, or a ``(grid, data)`` pair."""
    if isinstance(source, tuple) and len(source) == 2:
        return truncate_grid(source[0], source[1], k_seq, n_basis, lambda_grid, domain, **kwargs)
    if domain is None:
        raise ValueError("long-format truncation needs an explicit domain")
    return truncate_long(source, domain, k_seq, n_basis, lambda_grid, **kwargs)


@dataclass
class RealTimeFamily:
    """Models fitted independently for each fraction ``k``.

    For ``mode="pca"`` every entry is a ``(PCAModel, components)`` pair.
    """

    mode: str
    models: dict
    params: dict = field(default_factory=dict)

    @property
    def k_seq(self):
        return list(self.models)


def _map(fn, keys, n_jobs):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return dict(zip(keys, pool.map(fn, keys)))
    return {k: fn(k) for k in keys}


def _guard(fn):
    def run(k):
        try:
            return fn(k)
        except MfchartsError as exc:
            raise _with_k(exc, k) from exc

    return run


def fit_real_time(mode, x, y=None, n_jobs=1, **params):
    """Fit one model per fraction with identical hyperparameters.

    Parameters
    ----------
    mode : {"pca", "sof", "fof"}
    x : dict k -> MFD
        Truncated covariates.
    y : array or dict k -> MFD, optional
        Scalar response (``sof``, never truncated) or truncated functional
        response (``fof``).
    params : dict
        Passed to ``fit_sof_pc`` / ``fit_fof_pc``; for ``pca``, the key
        ``tot_variance_explained`` (default 0.95) picks the components.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    keys = list(x)
    if mode == "fof" and (y is None or set(y) != set(keys)):
        raise ShapeMismatch("fof mode needs a response family with the same k values as the covariates")
    if mode == "sof" and y is None:
        raise ShapeMismatch("sof mode needs the scalar response")

    def fit(k):
        if mode == "pca":
            pca = fit_mfpca(x[k])
            comps = params.get("components") or pca.components_for(params.get("tot_variance_explained", 0.95))
            return pca, list(comps)
        if mode == "sof":
            return fit_sof_pc(y, x[k], **params)
        return fit_fof_pc(y[k], x[k], **params)

    return RealTimeFamily(mode, _map(_guard(fit), keys, n_jobs), dict(params))


def monitor_real_time(family, x_new, y_new=None, tuning_x=None, tuning_y=None, alpha=None, n_jobs=1):
    """Chart frames ``k -> ChartFrame`` for new data truncated like the training data.

    ``y_new``/``tuning_y`` are a scalar vector for ``sof`` and dicts
    ``k -> MFD`` for ``fof``.
    """
    keys = family.k_seq
    if set(x_new) != set(keys):
        raise ShapeMismatch(f"new data k values {sorted(x_new)} differ from the family's {sorted(keys)}")
    if tuning_x is not None and set(tuning_x) != set(keys):
        raise ShapeMismatch("tuning data k values differ from the family's")

    def run(k):
        model = family.models[k]
        tun = None if tuning_x is None else tuning_x[k]
        if family.mode == "pca":
            pca, comps = model
            return control_charts_pca(pca, x_new[k], comps, tuning=tun, alpha=alpha)
        if family.mode == "sof":
            return control_charts_sof_pc(model, x_new[k], y_new, tuning_x=tun, alpha=alpha)
        tuning = None if tun is None else (tuning_y[k], tun)
        return regr_cc_fof(model, y_new[k], x_new[k], tuning=tuning, alpha=alpha)

    return _map(_guard(run), keys, n_jobs)


def real_time_path(frames, obs_id):
    """Statistic paths of one observation across ``k``.

    Returns a DataFrame with columns ``k, statistic, value, limit, oc``; the
    ``y`` statistic (scalar-response scheme) is the prediction error and its
    limit the symmetric half-width.
    """
    rows = []
    for k, fr in frames.items():
        i = fr.index_of(obs_id)
        rows.append((k, "t2", fr.t2[i], fr.t2_lim, bool(fr.oc_t2[i])))
        rows.append((k, "spe", fr.spe[i], fr.spe_lim, bool(fr.oc_spe[i])))
        if fr.has_y:
            rows.append((k, "y", fr.y[i], fr.y_hi[i], bool(fr.oc_y[i])))
    return pd.DataFrame(rows, columns=["k", "statistic", "value", "limit", "oc"])
