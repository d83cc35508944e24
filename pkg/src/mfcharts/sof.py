"""Scalar-on-function regression on MFPCA scores and its three-chart scheme."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .charts import _alpha, control_charts_pca, pca_limits
from .errors import InsufficientData, InsufficientDof, MfchartsError, NonFiniteInput, ShapeMismatch
from .mfd import MFD
from .mfpca import _components, fit_mfpca, scores_of_standardized, standardize_new

SOF_ALPHA = {"t2": 0.0125, "spe": 0.0125, "y": 0.025}
SELECTION_RULES = ("variance", "press", "gcv")


@dataclass(frozen=True)
class SofModel:
    """Fitted scalar-on-function model ``y = beta0 + sum_m b_m xi_m + eps``.

    ``beta_fn`` holds the functional coefficients ``sum_m b_m psi_m`` on the
    standardized covariate scale. ``x_train`` keeps the raw covariates for
    the bootstrap.
    """

    pca: object
    selected: list
    beta0: float
    b: np.ndarray
    sigma2_hat: float
    beta_fn: MFD
    y_train: np.ndarray
    fitted: np.ndarray
    selection_rule: str
    tot_variance_explained: float
    x_train: MFD

    @property
    def n_train(self):
        return self.y_train.size

    @property
    def dof_resid(self):
        return self.n_train - len(self.selected) - 1


def _ls_fit(y, scores):
    # closed form: scores are empirically orthogonal with zero mean
    beta0 = float(y.mean())
    ss = np.sum(scores**2, axis=0)
    b = (scores.T @ y) / ss
    return beta0, b, beta0 + scores @ b


def _press(y, scores):
    n = y.size
    _, _, fit = _ls_fit(y, scores)
    h = 1.0 / n + np.sum(scores**2 / np.sum(scores**2, axis=0), axis=1)
    return float(np.sum(((y - fit) / (1.0 - h)) ** 2))


def _gcv(y, scores):
    n = y.size
    _, _, fit = _ls_fit(y, scores)
    df = scores.shape[1] + 1
    return float(np.sum((y - fit) ** 2) / n / (1.0 - df / n) ** 2)


def _greedy(y, scores_all, criterion, max_m):
    """Single pass in eigenvalue order; keep a component only if it strictly lowers the criterion."""
    chosen = []
    current = criterion(y, scores_all[:, []])
    for m in range(scores_all.shape[1]):
        if len(chosen) >= max_m:
            break
        trial = chosen + [m]
        value = criterion(y, scores_all[:, trial])
        if value < current:
            chosen, current = trial, value
    if not chosen:
        chosen = [0]
    return chosen


def select_components(y, pca, rule="variance", tot_variance_explained=0.9):
    """Component set (0-based) chosen by ``rule``.

    ``variance`` takes the fewest leading components reaching the threshold;
    ``press`` and ``gcv`` scan components by decreasing eigenvalue and add
    each one only if it strictly decreases the criterion. At least one
    component is always returned.
    """
    rule = rule.lower()
    if rule not in SELECTION_RULES:
        raise ValueError(f"unknown selection rule {rule!r}; expected one of {SELECTION_RULES}")
    n = y.size
    max_m = min(pca.n_components, n - 2)
    if rule == "variance":
        return pca.components_for(tot_variance_explained)[:max_m]
    crit = _press if rule == "press" else _gcv
    return _greedy(y, pca.scores, crit, max_m)


def _beta_fn(pca, comps, b):
    coefs = np.einsum("kmp,m->kp", pca.eigenfunctions.coefs[:, comps, :], b)[:, None, :]
    return MFD(coefs, pca.basis, ["beta"], pca.var_names)


def fit_sof_pc(y, x, tot_variance_explained=0.9, selection="variance", components=None):
    """Fit the scalar-on-function model on principal component scores.

    Parameters
    ----------
    y : array of shape (n,)
    x : MFD
        Raw functional covariates; standardized internally.
    tot_variance_explained : float
        Threshold of the ``variance`` rule.
    selection : {"variance", "press", "gcv"}
    components : sequence of int, optional
        Explicit 0-based component set; overrides ``selection``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != x.n_obs:
        raise ShapeMismatch(f"y has {y.size} values for {x.n_obs} observations")
    if y.size < 3:
        raise InsufficientData("scalar-on-function regression needs at least 3 observations")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("response contains NaN or infinity")
    pca = fit_mfpca(x)
    if components is None:
        comps = select_components(y, pca, selection, tot_variance_explained)
    else:
        comps = _components(pca, components)
    if y.size - len(comps) - 1 < 1:
        raise InsufficientDof(f"{y.size} observations cannot support {len(comps)} components plus intercept")
    beta0, b, fitted = _ls_fit(y, pca.scores[:, comps])
    sigma2 = float(np.sum((y - fitted) ** 2) / (y.size - len(comps) - 1))
    return SofModel(
        pca=pca,
        selected=list(comps),
        beta0=beta0,
        b=b,
        sigma2_hat=sigma2,
        beta_fn=_beta_fn(pca, comps, b),
        y_train=y,
        fitted=fitted,
        selection_rule="explicit" if components is not None else selection.lower(),
        tot_variance_explained=float(tot_variance_explained),
        x_train=x,
    )


@dataclass(frozen=True)
class SofPrediction:
    yhat: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    t2: np.ndarray


def predict_sof(model, xnew, alpha_y=0.025):
    """Predictions and prediction intervals for new covariates.

    The interval is ``yhat +- q * sigma_hat * sqrt(1 + T2/(n - 1))`` with
    ``q`` the ``1 - alpha_y/2`` quantile of Student's t on ``n - M - 1``
    degrees of freedom and ``T2`` over the selected components.
    """
    comps = model.selected
    xs = standardize_new(model.pca, xnew)
    scores = scores_of_standardized(model.pca, xs, comps)
    yhat = model.beta0 + scores @ model.b
    t2 = np.sum(scores**2 / model.pca.eigenvalues[comps], axis=1)
    q = stats.t.ppf(1.0 - alpha_y / 2.0, model.dof_resid)
    half = q * np.sqrt(model.sigma2_hat) * np.sqrt(1.0 + t2 / (model.n_train - 1))
    return SofPrediction(yhat, yhat - half, yhat + half, t2)


def predict_sof_functional(model, xnew):
    """``beta0 + sum_p int X*_p beta_p``: the integral form of the prediction."""
    xs = standardize_new(model.pca, xnew)
    ip = np.einsum("kip,kl,lp->i", xs.coefs, model.pca.basis.gram, model.beta_fn.coefs[:, 0, :])
    return model.beta0 + ip


def control_charts_sof_pc(model, x_new, y_new, tuning_x=None, alpha=None):
    """T2, SPE and response-prediction-error charts.

    T2 and SPE equal those of :func:`control_charts_pca` on the covariates
    with the selected components; the y chart holds ``y* - yhat*`` with the
    per-observation limits ``-+(hi - yhat*)``.
    """
    alpha = _alpha(alpha, SOF_ALPHA)
    y_new = np.asarray(y_new, dtype=float).ravel()
    if y_new.size != x_new.n_obs:
        raise ShapeMismatch(f"y_new has {y_new.size} values for {x_new.n_obs} observations")
    lims = pca_limits(model.pca, model.selected, alpha, tuning_x)
    base = control_charts_pca(
        model.pca, x_new, model.selected, alpha={"t2": alpha["t2"], "spe": alpha["spe"]}, limits=lims
    )
    pred = predict_sof(model, x_new, alpha["y"])
    half = pred.hi - pred.yhat
    base.y = y_new - pred.yhat
    base.y_lo = -half
    base.y_hi = half
    base.alpha = alpha
    return base


@dataclass
class BootstrapResult:
    """Replicate functional coefficients, ``None`` where a replicate failed."""

    betas: list
    indices: list
    failures: dict

    @property
    def n_ok(self):
        return sum(b is not None for b in self.betas)


def bootstrap_beta(model, nboot=100, seed=0, n_jobs=1, resample_indices=None):
    """Refit the whole pipeline on ``nboot`` resamples of ``(y_i, X_i)``.

    Each replicate draws from its own stream spawned from ``seed``, so the
    output does not depend on ``n_jobs``. Replicates that raise are kept as
    ``None`` with the error message in ``failures``.
    """
    if nboot < 1:
        raise ValueError("nboot must be at least 1")
    n = model.n_train
    if resample_indices is None:
        streams = np.random.SeedSequence(seed).spawn(nboot)
        resample_indices = [np.random.default_rng(s).integers(0, n, n) for s in streams]
    resample_indices = [np.asarray(ix, dtype=int) for ix in resample_indices]
    rule = model.selection_rule
    comps = model.selected if rule == "explicit" else None

    def run(ix):
        xb = MFD(model.x_train.coefs[:, ix, :], model.x_train.basis, None, model.x_train.var_names)
        fit = fit_sof_pc(
            model.y_train[ix],
            xb,
            tot_variance_explained=model.tot_variance_explained,
            selection="variance" if rule == "explicit" else rule,
            components=comps,
        )
        return fit.beta_fn

    def guarded(ix):
        try:
            return run(ix), None
        except MfchartsError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(guarded, resample_indices))
    else:
        out = [guarded(ix) for ix in resample_indices]
    failures = {i: msg for i, (_, msg) in enumerate(out) if msg is not None}
    return BootstrapResult([b for b, _ in out], resample_indices, failures)
