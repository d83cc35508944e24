"""Multivariate functional data container and its constructors.

An :class:`MFD` holds ``P`` functional variables observed on ``n``
replications, all expanded on one shared B-spline basis. The coefficient
tensor is always ``(K, n, P)``; selecting a single observation or variable
never drops an axis.
"""

from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .basis import BSplineBasis, project, select_lambda_gcv
from .errors import (
    ArgOutOfDomain,
    BasisMismatch,
    DegenerateVariable,
    InsufficientPoints,
    ShapeMismatch,
    UnknownId,
    UnknownVariable,
)

N_EVAL = 500
SD_FLOOR = 1e-12


class MFD:
    """Basis-coefficient representation of multivariate functional data.

    Parameters
    ----------
    coefs : array of shape (K, n, P)
    basis : BSplineBasis
    obs_ids : sequence of str, optional
        Defaults to ``"1" .. "n"``.
    var_names : sequence of str, optional
        Defaults to ``"X1" .. "XP"``.
    raw : pandas.DataFrame, optional
        Long-format discrete data (``id``, ``arg`` and one column per
        variable) retained from ingestion.
    lambdas : array of shape (n, P), optional
        Smoothing parameters selected per curve.
    """

    def __init__(self, coefs, basis, obs_ids=None, var_names=None, raw=None, lambdas=None):
        # C order keeps BLAS paths, hence rounding, identical after persistence
        coefs = np.array(coefs, dtype=float, order="C")
        if coefs.ndim != 3:
            raise ShapeMismatch(f"coefficient tensor must be 3-dimensional, got shape {coefs.shape}")
        if coefs.shape[0] != basis.n_basis:
            raise ShapeMismatch(f"first axis has {coefs.shape[0]} rows but basis has {basis.n_basis} functions")
        _, n, p = coefs.shape
        obs_ids = [str(i + 1) for i in range(n)] if obs_ids is None else [str(i) for i in obs_ids]
        var_names = [f"X{j + 1}" for j in range(p)] if var_names is None else [str(v) for v in var_names]
        if len(obs_ids) != n or len(set(obs_ids)) != n:
            raise ShapeMismatch("obs_ids must be unique and match the number of observations")
        if len(var_names) != p or len(set(var_names)) != p:
            raise ShapeMismatch("var_names must be unique and match the number of variables")
        coefs.setflags(write=False)
        self.coefs = coefs
        self.basis = basis
        self.obs_ids = obs_ids
        self.var_names = var_names
        self.raw = raw
        self.lambdas = None if lambdas is None else np.asarray(lambdas, dtype=float).reshape(n, p)

    @property
    def n_obs(self):
        return self.coefs.shape[1]

    @property
    def n_vars(self):
        return self.coefs.shape[2]

    def __len__(self):
        return self.n_obs

    def __repr__(self):
        return (
            f"MFD(n_obs={self.n_obs}, vars={self.var_names}, n_basis={self.basis.n_basis}, "
            f"domain={self.basis.domain})"
        )

    def evaluate(self, points):
        """Values at ``points`` as a ``(len(points), n, P)`` array."""
        z = self.basis.evaluate(points)
        return np.einsum("gk,knp->gnp", z, self.coefs)

    def _resolve(self, sel, labels, exc):
        n = len(labels)
        if sel is None or (isinstance(sel, slice) and sel == slice(None)):
            return list(range(n))
        if isinstance(sel, slice):
            return list(range(n))[sel]
        if isinstance(sel, (str, int, np.integer)):
            sel = [sel]
        out = []
        lookup = {name: i for i, name in enumerate(labels)}
        for s in sel:
            if isinstance(s, (bool, np.bool_)):
                raise TypeError("boolean selectors are not supported")
            if isinstance(s, (int, np.integer)):
                if not -n <= s < n:
                    raise exc(f"index {s} out of range for {n} entries")
                out.append(int(s) % n)
            elif str(s) in lookup:
                out.append(lookup[str(s)])
            else:
                raise exc(f"unknown label {s!r}")
        return out

    def subset(self, obs=None, vars=None):
        """Select observations and variables by position or by name, keeping 3 axes."""
        oi = self._resolve(obs, self.obs_ids, UnknownId)
        vi = self._resolve(vars, self.var_names, UnknownVariable)
        raw = None
        if self.raw is not None:
            ids = [self.obs_ids[i] for i in oi]
            names = [self.var_names[j] for j in vi]
            raw = self.raw.loc[self.raw["id"].isin(ids), ["id", "arg", *names]].reset_index(drop=True)
        lambdas = None if self.lambdas is None else self.lambdas[np.ix_(oi, vi)]
        return MFD(
            self.coefs[:, oi, :][:, :, vi],
            self.basis,
            [self.obs_ids[i] for i in oi],
            [self.var_names[j] for j in vi],
            raw=raw,
            lambdas=lambdas,
        )

    def __getitem__(self, key):
        if isinstance(key, tuple):
            if len(key) != 2:
                raise IndexError("use mfd[obs, vars]")
            return self.subset(key[0], key[1])
        return self.subset(key, None)

    def with_coefs(self, coefs, var_names=None, obs_ids=None):
        return MFD(
            coefs,
            self.basis,
            self.obs_ids if obs_ids is None else obs_ids,
            self.var_names if var_names is None else var_names,
        )

    def check_compatible(self, other, what="data"):
        if not self.basis.same_as(other.basis):
            raise BasisMismatch(f"{what} basis {other.basis.to_dict()} differs from {self.basis.to_dict()}")
        if list(self.var_names) != list(other.var_names):
            raise BasisMismatch(f"{what} variables {other.var_names} differ from {self.var_names}")


def concat(items):
    """Stack observations of several MFDs sharing basis and variables."""
    items = list(items)
    first = items[0]
    for it in items[1:]:
        first.check_compatible(it)
    ids = [i for it in items for i in it.obs_ids]
    return MFD(np.concatenate([it.coefs for it in items], axis=1), first.basis, ids, first.var_names)


def _as_var_dict(data, var_names):
    if isinstance(data, Mapping):
        names = list(data.keys()) if var_names is None else list(var_names)
        mats = [np.atleast_2d(np.asarray(data[k], dtype=float)) for k in names]
    else:
        if isinstance(data, np.ndarray) and data.ndim == 2:
            data = [data]
        mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in data]
        names = [f"X{j + 1}" for j in range(len(mats))] if var_names is None else list(var_names)
    if len(names) != len(mats):
        raise ShapeMismatch("number of variable names does not match number of matrices")
    # fixed layout so the result does not depend on how the caller sliced its arrays
    return names, [np.ascontiguousarray(m) for m in mats]


def mfd_from_grid(grid, data, n_basis=30, lambda_grid=None, domain=None, obs_ids=None, var_names=None, keep_raw=False):
    """Smooth curves observed on a common grid.

    Parameters
    ----------
    grid : array of shape (g,)
    data : mapping name -> (n, g) array, or a sequence of (n, g) arrays
    n_basis : int
    lambda_grid : array, optional
        Candidate smoothing parameters; one is chosen per curve and variable
        by GCV. Defaults to :func:`mfcharts.basis.default_lambda_grid`.
    domain : (lo, hi), optional
        Defaults to the grid range.

    Each λ costs one factorization per variable, shared by all curves.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    names, mats = _as_var_dict(data, var_names)
    n = mats[0].shape[0]
    for name, m in zip(names, mats):
        if m.shape != (n, grid.size):
            raise ShapeMismatch(f"variable {name!r} has shape {m.shape}, expected {(n, grid.size)}")
    lo, hi = (grid.min(), grid.max()) if domain is None else domain
    basis = BSplineBasis(lo, hi, n_basis)
    coefs = np.empty((n_basis, n, len(names)))
    lambdas = np.empty((n, len(names)))
    for j, m in enumerate(mats):
        fit = select_lambda_gcv(grid, m.T, basis, lambda_grid)
        coefs[:, :, j] = fit.coefficients
        lambdas[:, j] = fit.lam
    raw = None
    ids = [str(i + 1) for i in range(n)] if obs_ids is None else [str(i) for i in obs_ids]
    if keep_raw:
        raw = pd.DataFrame(
            {"id": np.repeat(ids, grid.size), "arg": np.tile(grid, n), **{k: m.ravel() for k, m in zip(names, mats)}}
        )
    return MFD(coefs, basis, ids, names, raw=raw, lambdas=lambdas)


@dataclass(frozen=True)
class LongRecord:
    id: str
    arg: float
    values: dict = field(default_factory=dict)


def records_to_frame(records, variables=None):
    """Normalize long-format input (DataFrame or iterable of LongRecord/dicts)."""
    if isinstance(records, pd.DataFrame):
        df = records.copy()
    else:
        rows = []
        for r in records:
            if isinstance(r, LongRecord):
                rows.append({"id": r.id, "arg": r.arg, **r.values})
            else:
                rows.append(dict(r))
        df = pd.DataFrame(rows)
    df["id"] = df["id"].astype(str)
    df["arg"] = df["arg"].astype(float)
    if variables is None:
        variables = [c for c in df.columns if c not in ("id", "arg")]
    missing = [v for v in variables if v not in df.columns]
    if missing:
        raise UnknownVariable(f"variables not found in long data: {missing}")
    return df, list(variables)


def _smooth_one(args, vals, basis, lambda_grid, obs_id, var):
    keep = np.isfinite(vals)
    args, vals = args[keep], vals[keep]
    if args.size < basis.n_basis:
        raise InsufficientPoints(
            f"observation {obs_id!r}, variable {var!r}: {args.size} points, need at least {basis.n_basis}",
            obs_id=obs_id,
            var=var,
        )
    order = np.argsort(args, kind="stable")
    fit = select_lambda_gcv(args[order], vals[order], basis, lambda_grid)
    return fit.coefficients, fit.lam


def mfd_from_long(records, domain, n_basis=30, lambda_grid=None, variables=None, n_jobs=1):
    """Smooth curves each observed on its own grid (long format).

    ``records`` has columns ``id``, ``arg`` and one column per variable;
    missing cells are dropped per variable. Observations keep the order of
    first appearance. Each (curve, variable) pair is an independent fit, run
    on ``n_jobs`` threads; the result does not depend on ``n_jobs``.
    """
    df, variables = records_to_frame(records, variables)
    lo, hi = domain
    basis = BSplineBasis(lo, hi, n_basis)
    slack = 1e-10 * (basis.domain_hi - basis.domain_lo)
    bad = (df["arg"] < basis.domain_lo - slack) | (df["arg"] > basis.domain_hi + slack)
    if bad.any():
        first = df.loc[bad].iloc[0]
        raise ArgOutOfDomain(f"arg {first['arg']} of observation {first['id']!r} outside [{lo}, {hi}]")
    ids = list(pd.unique(df["id"]))
    groups = {k: g for k, g in df.groupby("id", sort=False)}
    tasks = []
    for i, obs_id in enumerate(ids):
        g = groups[obs_id]
        args = g["arg"].to_numpy(dtype=float)
        for j, var in enumerate(variables):
            tasks.append((i, j, args, g[var].to_numpy(dtype=float), obs_id, var))

    def run(task):
        i, j, args, vals, obs_id, var = task
        return i, j, _smooth_one(args, vals, basis, lambda_grid, obs_id, var)

    coefs = np.empty((n_basis, len(ids), len(variables)))
    lambdas = np.empty((len(ids), len(variables)))
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    for i, j, (c, lam) in results:
        coefs[:, i, j] = c
        lambdas[i, j] = lam
    raw = df[["id", "arg", *variables]].reset_index(drop=True)
    return MFD(coefs, basis, ids, variables, raw=raw, lambdas=lambdas)


@dataclass(frozen=True)
class FunctionalSummary:
    """Pointwise mean and standard deviation used to standardize.

    ``grid``, ``mean_values`` and ``sd_values`` are the exact pointwise
    statistics on the evaluation grid, and are what standardization uses;
    ``mean_fn`` / ``sd_fn`` are their basis representations for display and
    persistence. ``scale=False`` marks a centering-only summary (unit sd).
    """

    mean_fn: MFD
    sd_fn: MFD
    grid: np.ndarray
    mean_values: np.ndarray
    sd_values: np.ndarray
    scale: bool = True

    @property
    def basis(self):
        return self.mean_fn.basis

    @property
    def var_names(self):
        return self.mean_fn.var_names


def evaluation_grid(basis, n=N_EVAL):
    return np.linspace(basis.domain_lo, basis.domain_hi, n)


def summarize(x, scale=True, center=True, n_eval=N_EVAL):
    """Sample mean and sd functions of ``x``.

    With ``center=False`` the mean is taken as zero; with ``scale=False`` the
    sd is taken as one.
    """
    if x.n_obs < 2:
        raise ShapeMismatch("standardization needs at least 2 observations")
    grid = evaluation_grid(x.basis, n_eval)
    if center:
        mean_c = x.coefs.mean(axis=1, keepdims=True)
    else:
        mean_c = np.zeros((x.basis.n_basis, 1, x.n_vars))
    mean_fn = MFD(mean_c, x.basis, ["mean"], x.var_names)
    mean_values = mean_fn.evaluate(grid)[:, 0, :]
    if scale:
        vals = x.evaluate(grid)
        sd_values = vals.std(axis=1, ddof=1)
        for j, name in enumerate(x.var_names):
            if not np.all(sd_values[:, j] > SD_FLOOR):
                raise DegenerateVariable(f"variable {name!r} has (near) zero standard deviation on part of the domain")
        sd_c = np.stack([project(grid, sd_values[:, j], x.basis) for j in range(x.n_vars)], axis=1)[:, None, :]
    else:
        sd_values = np.ones_like(mean_values)
        sd_c = np.zeros((x.basis.n_basis, 1, x.n_vars))
        sd_c[:] = 1.0  # constants are reproduced exactly by a clamped B-spline basis
    sd_fn = MFD(sd_c, x.basis, ["sd"], x.var_names)
    return FunctionalSummary(mean_fn, sd_fn, grid, mean_values, sd_values, scale)


def apply_summary(summary, x):
    """Standardize ``x`` with a summary computed elsewhere (usually on training data)."""
    summary.mean_fn.check_compatible(x)
    if not summary.scale:
        return x.with_coefs(x.coefs - summary.mean_fn.coefs)
    vals = (x.evaluate(summary.grid) - summary.mean_values[:, None, :]) / summary.sd_values[:, None, :]
    coefs = np.stack([project(summary.grid, vals[:, :, j], x.basis) for j in range(x.n_vars)], axis=2)
    return x.with_coefs(coefs)


def destandardize(summary, x):
    """Map standardized functions back to the original scale."""
    summary.mean_fn.check_compatible(x)
    if not summary.scale:
        return x.with_coefs(x.coefs + summary.mean_fn.coefs)
    vals = x.evaluate(summary.grid) * summary.sd_values[:, None, :] + summary.mean_values[:, None, :]
    coefs = np.stack([project(summary.grid, vals[:, :, j], x.basis) for j in range(x.n_vars)], axis=2)
    return x.with_coefs(coefs)


def standardize(x, scale=True, center=True):
    """Subtract the pointwise sample mean and divide by the pointwise sample sd.

    Returns the standardized MFD and the summary, which standardizes future
    observations identically through :func:`apply_summary`.
    """
    summary = summarize(x, scale=scale, center=center)
    return apply_summary(summary, x), summary


def inner_product(a, b):
    """Matrix of ``sum_p int a_ip(t) b_jp(t) dt``, shape ``(a.n_obs, b.n_obs)``."""
    a.check_compatible(b)
    w = a.basis.gram
    return np.einsum("kip,kl,ljp->ij", a.coefs, w, b.coefs)


def inner_product_by_var(a, b):
    """Per-variable inner products, shape ``(a.n_obs, b.n_obs, P)``."""
    a.check_compatible(b)
    return np.einsum("kip,kl,ljp->ijp", a.coefs, a.basis.gram, b.coefs)


def squared_norms_by_var(x):
    """``int x_ip(t)^2 dt`` as an ``(n, P)`` array."""
    return np.einsum("kip,kl,lip->ip", x.coefs, x.basis.gram, x.coefs)
