"""Multivariate functional principal component analysis in coefficient space.

With the stacked coefficient matrix ``C`` (n x PK) and the block-diagonal
Gram matrix ``W``, the eigenproblem of the empirical covariance operator is
the symmetric problem for ``W^1/2 C' C W^1/2 / (n-1)``. It is solved here by
an SVD of ``C W^1/2``; eigenfunction coefficients are recovered through
``W^-1/2`` and are orthonormal in ``sum_p int psi_mp psi_lp``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EigenFailure, ShapeMismatch
from .mfd import MFD, apply_summary, destandardize, summarize

EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class PCAModel:
    """Fitted MFPCA.

    Attributes
    ----------
    eigenfunctions : MFD
        One "observation" per component, on the standardized scale.
    eigenvalues : ndarray
        Non-increasing, strictly positive.
    scores : ndarray of shape (n_train, n_components)
    var_prop : ndarray
        ``eigenvalues / eigenvalues.sum()``.
    summary : FunctionalSummary
        Standardization learned on the training data.
    train : MFD
        Standardized training data.
    """

    eigenfunctions: MFD
    eigenvalues: np.ndarray
    scores: np.ndarray
    var_prop: np.ndarray
    summary: object
    train: MFD

    @property
    def n_train(self):
        return self.train.n_obs

    @property
    def n_components(self):
        return self.eigenvalues.size

    @property
    def basis(self):
        return self.eigenfunctions.basis

    @property
    def var_names(self):
        return self.eigenfunctions.var_names

    def n_components_for(self, threshold):
        """Fewest leading components whose cumulative ``var_prop`` reaches ``threshold``."""
        cum = np.cumsum(self.var_prop)
        return int(min(np.searchsorted(cum, threshold - 1e-12) + 1, self.n_components))

    def components_for(self, threshold):
        return list(range(self.n_components_for(threshold)))


def _sqrt_gram(w):
    vals, vecs = np.linalg.eigh(w)
    if vals.min() <= 0:
        raise EigenFailure("basis Gram matrix is not positive definite")
    root = (vecs * np.sqrt(vals)) @ vecs.T
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def _stack(coefs):
    # (K, n, P) -> (n, P*K), variable blocks side by side
    k, n, p = coefs.shape
    return coefs.transpose(1, 2, 0).reshape(n, p * k)


def _unstack(mat, k, p):
    # (m, P*K) -> (K, m, P)
    return mat.reshape(mat.shape[0], p, k).transpose(2, 0, 1)


def pca_from_standardized(xs, summary):
    """Eigen-decompose already standardized data ``xs``."""
    n = xs.n_obs
    k, p = xs.basis.n_basis, xs.n_vars
    if n < 2:
        raise ShapeMismatch("MFPCA needs at least 2 observations")
    root, inv_root = _sqrt_gram(xs.basis.gram)
    c = _stack(xs.coefs)
    a = (c.reshape(n, p, k) @ root).reshape(n, p * k)
    if not np.all(np.isfinite(a)):
        raise EigenFailure("non-finite coefficients")
    try:
        _, sing, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    eigvals = sing**2 / (n - 1)
    keep = min(n - 1, p * k)
    eigvals, vt = eigvals[:keep], vt[:keep]
    usable = eigvals > EIG_FLOOR
    eigvals, vt = eigvals[usable], vt[usable]
    if eigvals.size == 0:
        raise EigenFailure("all eigenvalues are numerically zero")
    scores = a @ vt.T
    # largest |score| on each component is made positive
    pick = np.argmax(np.abs(scores), axis=0)
    signs = np.sign(scores[pick, np.arange(scores.shape[1])])
    signs[signs == 0] = 1.0
    scores = scores * signs
    vt = vt * signs[:, None]
    psi = (vt.reshape(-1, p, k) @ inv_root).reshape(-1, p * k)
    eigenfunctions = MFD(
        _unstack(psi, k, p), xs.basis, [f"PC{m + 1}" for m in range(eigvals.size)], xs.var_names
    )
    return PCAModel(
        eigenfunctions=eigenfunctions,
        eigenvalues=np.ascontiguousarray(eigvals),
        scores=np.ascontiguousarray(scores),
        var_prop=eigvals / eigvals.sum(),
        summary=summary,
        train=xs,
    )


def fit_mfpca(x, scale=True, center=True):
    """Fit MFPCA on ``x`` after standardizing it.

    Parameters
    ----------
    x : MFD
        Raw (unstandardized) data, at least 2 observations.
    scale, center : bool
        Standardization steps. The default is full pointwise
        standardization; ``scale=False`` only centers.
    """
    summary = summarize(x, scale=scale, center=center)
    return pca_from_standardized(apply_summary(summary, x), summary)


def _components(model, components):
    if components is None:
        return list(range(model.n_components))
    comps = [int(c) for c in np.atleast_1d(components)]
    for c in comps:
        if not 0 <= c < model.n_components:
            raise ShapeMismatch(f"component {c} out of range (model has {model.n_components})")
    return comps


def standardize_new(model, xnew):
    model.eigenfunctions.check_compatible(xnew)
    return apply_summary(model.summary, xnew)


def scores_of_standardized(model, xs, components=None):
    comps = _components(model, components)
    w = model.basis.gram
    psi = model.eigenfunctions.coefs[:, comps, :]
    return np.einsum("kip,kl,lmp->im", xs.coefs, w, psi)


def project_scores(model, xnew, components=None):
    """Scores of new observations: standardize with the training summary, then
    integrate against the eigenfunctions. Returns ``(n_new, len(components))``."""
    return scores_of_standardized(model, standardize_new(model, xnew), components)


def reconstruct(model, scores, components=None, destandardized=False):
    """Truncated expansion ``sum_m scores[:, m] psi_m``.

    On the standardized scale unless ``destandardized`` is True.
    """
    comps = _components(model, components)
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if scores.shape[1] != len(comps):
        raise ShapeMismatch(f"scores have {scores.shape[1]} columns for {len(comps)} components")
    coefs = np.einsum("kmp,im->kip", model.eigenfunctions.coefs[:, comps, :], scores)
    out = MFD(coefs, model.basis, [str(i + 1) for i in range(scores.shape[0])], model.var_names)
    if destandardized:
        out = destandardize(model.summary, out)
    return out
