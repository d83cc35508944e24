"""Function-on-function regression control charts on functional residuals.

Response and covariates are standardized and reduced by separate MFPCAs;
response scores are regressed on covariate scores, and the functional
residuals (plain or studentized) are monitored through a third MFPCA.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .charts import PCA_ALPHA, ChartFrame, _alpha, empirical_limit, pca_statistics
from .errors import InsufficientData, ShapeMismatch
from .basis import project
from .mfd import MFD, apply_summary, evaluation_grid
from .mfpca import fit_mfpca, scores_of_standardized, standardize_new

RESIDUAL_TYPES = ("standard", "studentized")
DENOM_FLOOR = 1e-8
SURFACE_POINTS = 50


@dataclass(frozen=True)
class FofModel:
    """Fitted function-on-function model.

    Attributes
    ----------
    pca_x, pca_y : PCAModel
    comps_x, comps_y : list of int
        Retained covariate (L) and response (M) components.
    B : ndarray of shape (L, M)
        Score-on-score coefficients ``b_lm``.
    pca_res : PCAModel
        Centering-only MFPCA of the training residuals.
    comps_res : list of int
        Retained residual components (K).
    sigma_eps : ndarray of shape (M, M)
        Covariance of the score-space errors, divisor ``n``.
    v_eps_grid, v_eps_values : ndarray
        Pointwise residual variance, divisor ``n - 1``, on the evaluation grid.
    """

    pca_x: object
    pca_y: object
    comps_x: list
    comps_y: list
    B: np.ndarray
    pca_res: object
    comps_res: list
    residual_type: str
    sigma_eps: np.ndarray
    v_eps_grid: np.ndarray
    v_eps_values: np.ndarray
    thresholds: tuple

    @property
    def n_train(self):
        return self.pca_x.n_train

    @property
    def v_eps_fn(self):
        coef = project(self.v_eps_grid, self.v_eps_values, self.pca_y.basis)
        return MFD(coef[:, None, None], self.pca_y.basis, ["v_eps"], self.pca_y.var_names)

    def beta_coefs(self):
        """Tensor-product coefficients of ``beta_p(s, t)``, shape ``(P, Kx, Ky)``."""
        psi_x = self.pca_x.eigenfunctions.coefs[:, self.comps_x, :]  # (Kx, L, P)
        psi_y = self.pca_y.eigenfunctions.coefs[:, self.comps_y, 0]  # (Ky, M)
        return np.einsum("alp,lm,bm->pab", psi_x, self.B, psi_y)

    def beta_surface(self, s, t):
        """``beta_p(s, t) = sum_l sum_m b_lm psi^X_lp(s) psi^Y_m(t)``, shape ``(P, len(s), len(t))``."""
        zs = self.pca_x.basis.evaluate(s)
        zt = self.pca_y.basis.evaluate(t)
        return np.einsum("ia,pab,jb->pij", zs, self.beta_coefs(), zt)


def _check_pair(y, x):
    if y.n_vars != 1:
        raise ShapeMismatch(f"the functional response must be univariate, got {y.n_vars} variables")
    if y.n_obs != x.n_obs:
        raise ShapeMismatch(f"response has {y.n_obs} observations but covariates have {x.n_obs}")


def _score_parts(model, y, x):
    ys = standardize_new(model.pca_y, y)
    xi_x = scores_of_standardized(model.pca_x, standardize_new(model.pca_x, x), model.comps_x)
    return ys, xi_x


def _fitted_coefs(pca_y, comps_y, xi_x, B):
    # (Ky, n): sum_m (xi_x B)_im psi^Y_m
    return pca_y.eigenfunctions.coefs[:, comps_y, 0] @ (xi_x @ B).T


def _studentize(model_parts, resid_coefs, xi_x):
    pca_x, comps_x, pca_y, comps_y, sigma_eps, grid, v_vals = model_parts
    basis = pca_y.basis
    e = basis.evaluate(grid) @ resid_coefs  # (g, n)
    psi = basis.evaluate(grid) @ pca_y.eigenfunctions.coefs[:, comps_y, 0]  # (g, M)
    quad = np.einsum("gm,mk,gk->g", psi, sigma_eps, psi)
    lev = np.sum(xi_x**2 / pca_x.eigenvalues[comps_x], axis=1)
    denom2 = v_vals[:, None] + quad[:, None] * lev[None, :]
    low = denom2 < DENOM_FLOOR
    if np.any(low):
        warnings.warn(
            f"studentized residual denominator below {DENOM_FLOOR:g} at {int(low.sum())} grid points; clamped",
            RuntimeWarning,
            stacklevel=3,
        )
        denom2 = np.maximum(denom2, DENOM_FLOOR)
    return project(grid, e / np.sqrt(denom2), basis)


def fit_fof_pc(
    y,
    x,
    residual_type="standard",
    tot_variance_explained_x=0.95,
    tot_variance_explained_y=0.95,
    tot_variance_explained_res=0.95,
):
    """Fit the function-on-function model and the residual MFPCA.

    Parameters
    ----------
    y : MFD
        Functional response with a single variable.
    x : MFD
        Functional covariates, possibly on another domain.
    residual_type : {"standard", "studentized"}
    tot_variance_explained_x, tot_variance_explained_y, tot_variance_explained_res : float
        Cumulative-variance thresholds choosing L, M and K.
    """
    residual_type = residual_type.lower()
    if residual_type not in RESIDUAL_TYPES:
        raise ValueError(f"residual_type must be one of {RESIDUAL_TYPES}, got {residual_type!r}")
    _check_pair(y, x)
    if y.n_obs < 3:
        raise InsufficientData("function-on-function regression needs at least 3 observations")
    pca_x = fit_mfpca(x)
    pca_y = fit_mfpca(y)
    comps_x = pca_x.components_for(tot_variance_explained_x)
    comps_y = pca_y.components_for(tot_variance_explained_y)
    xi_x = pca_x.scores[:, comps_x]
    xi_y = pca_y.scores[:, comps_y]
    B = (xi_x.T @ xi_y) / np.sum(xi_x**2, axis=0)[:, None]
    n = y.n_obs
    eps = xi_y - xi_x @ B
    sigma_eps = eps.T @ eps / n
    resid = pca_y.train.coefs[:, :, 0] - _fitted_coefs(pca_y, comps_y, xi_x, B)
    grid = evaluation_grid(pca_y.basis)
    e_vals = pca_y.basis.evaluate(grid) @ resid
    v_vals = np.sum(e_vals**2, axis=1) / (n - 1)
    if residual_type == "studentized":
        parts = (pca_x, comps_x, pca_y, comps_y, sigma_eps, grid, v_vals)
        resid = _studentize(parts, resid, xi_x)
    res_mfd = MFD(resid[:, :, None], pca_y.basis, y.obs_ids, y.var_names)
    pca_res = fit_mfpca(res_mfd, scale=False)
    comps_res = pca_res.components_for(tot_variance_explained_res)
    return FofModel(
        pca_x=pca_x,
        pca_y=pca_y,
        comps_x=comps_x,
        comps_y=comps_y,
        B=B,
        pca_res=pca_res,
        comps_res=comps_res,
        residual_type=residual_type,
        sigma_eps=sigma_eps,
        v_eps_grid=grid,
        v_eps_values=v_vals,
        thresholds=(tot_variance_explained_x, tot_variance_explained_y, tot_variance_explained_res),
    )


def predict_fof_pc(model, y_new, x_new):
    """Standardized-scale prediction and prediction error of new pairs.

    Returns ``(pred, pred_error)``; the error is the plain residual or the
    studentized one, following the model's ``residual_type``.
    """
    _check_pair(y_new, x_new)
    ys, xi_x = _score_parts(model, y_new, x_new)
    fitted = _fitted_coefs(model.pca_y, model.comps_y, xi_x, model.B)
    resid = ys.coefs[:, :, 0] - fitted
    if model.residual_type == "studentized":
        parts = (
            model.pca_x,
            model.comps_x,
            model.pca_y,
            model.comps_y,
            model.sigma_eps,
            model.v_eps_grid,
            model.v_eps_values,
        )
        resid = _studentize(parts, resid, xi_x)
    pred = MFD(fitted[:, :, None], model.pca_y.basis, y_new.obs_ids, y_new.var_names)
    err = MFD(resid[:, :, None], model.pca_y.basis, y_new.obs_ids, y_new.var_names)
    return pred, err


def studentized_denominator(model, x_new):
    """Squared studentization denominator on the evaluation grid, shape ``(g, n)``."""
    xi_x = scores_of_standardized(model.pca_x, standardize_new(model.pca_x, x_new), model.comps_x)
    psi = model.pca_y.basis.evaluate(model.v_eps_grid) @ model.pca_y.eigenfunctions.coefs[:, model.comps_y, 0]
    quad = np.einsum("gm,mk,gk->g", psi, model.sigma_eps, psi)
    lev = np.sum(xi_x**2 / model.pca_x.eigenvalues[model.comps_x], axis=1)
    return model.v_eps_values[:, None] + quad[:, None] * lev[None, :]


def residual_limits(model, alpha, tuning=None):
    if tuning is None:
        ref = model.pca_res.train
    else:
        _, err = predict_fof_pc(model, *tuning)
        ref = apply_summary(model.pca_res.summary, err)
    t2, spe, ct2, cspe = pca_statistics(model.pca_res, ref, model.comps_res)
    return {
        "t2_lim": empirical_limit(t2, alpha["t2"]),
        "spe_lim": empirical_limit(spe, alpha["spe"]),
        "cont_lim_t2": np.array([empirical_limit(ct2[:, 0], alpha["t2"])]),
        "cont_lim_spe": np.array([empirical_limit(cspe[:, 0], alpha["spe"])]),
    }


def regr_cc_fof(model, y_new, x_new, tuning=None, alpha=None):
    """T2 and SPE charts on the scores of the functional residuals.

    Parameters
    ----------
    tuning : (MFD, MFD), optional
        In-control ``(y, x)`` pair for the limits; training residuals when omitted.
    alpha : dict, optional
        Default ``{"t2": 0.025, "spe": 0.025}``.
    """
    alpha = _alpha(alpha, PCA_ALPHA)
    lims = residual_limits(model, alpha, tuning)
    _, err = predict_fof_pc(model, y_new, x_new)
    res = apply_summary(model.pca_res.summary, err)
    t2, spe, ct2, cspe = pca_statistics(model.pca_res, res, model.comps_res)
    return ChartFrame(
        ids=y_new.obs_ids,
        var_names=model.pca_y.var_names,
        t2=t2,
        spe=spe,
        cont_t2=ct2,
        cont_spe=cspe,
        alpha=alpha,
        **lims,
    )


def beta_surface_frame(model, n_points=SURFACE_POINTS):
    """Dense ``n_points x n_points`` evaluation of every ``beta_p`` as a long table."""
    s = np.linspace(model.pca_x.basis.domain_lo, model.pca_x.basis.domain_hi, n_points)
    t = np.linspace(model.pca_y.basis.domain_lo, model.pca_y.basis.domain_hi, n_points)
    surf = model.beta_surface(s, t)
    frames = []
    for p, var in enumerate(model.pca_x.var_names):
        ss, tt = np.meshgrid(s, t, indexing="ij")
        frames.append(pd.DataFrame({"var": var, "s": ss.ravel(), "t": tt.ravel(), "value": surf[p].ravel()}))
    return pd.concat(frames, ignore_index=True)

