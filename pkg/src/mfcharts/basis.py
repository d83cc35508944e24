"""Cubic B-spline bases, roughness penalty and penalized least-squares smoothing."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import design_matrix
from .errors import (
    AllGcvNonFinite,
    EmptyGrid,
    InvalidDomain,
    NonFiniteInput,
    PointOutOfDomain,
    SingularSystem,
    TooFewBasis,
)

ORDER = 4
DEGREE = ORDER - 1

# ratio of smallest to largest |diagonal| of the triangular factor below
# which a penalized system is declared singular
PIVOT_TOL = 1e-12
_DOMAIN_SLACK = 1e-10


def default_lambda_grid(domain_lo=0.0, domain_hi=1.0, n=10):
    """Log-spaced smoothing parameters from 1e-10 to 1e2 in unit-domain terms.

    The roughness penalty scales with ``(hi - lo) ** -3``; the grid is
    multiplied by ``(hi - lo) ** 3`` so the same grid smooths equally on any
    domain length.
    """
    return np.logspace(-10, 2, n) * (domain_hi - domain_lo) ** 3


@dataclass(frozen=True)
class BSplineBasis:
    """Cubic B-spline system with equally spaced, clamped knots on ``[lo, hi]``."""

    domain_lo: float
    domain_hi: float
    n_basis: int

    def __post_init__(self):
        if not np.isfinite(self.domain_lo) or not np.isfinite(self.domain_hi):
            raise InvalidDomain("domain bounds must be finite")
        if self.domain_hi <= self.domain_lo:
            raise InvalidDomain(f"domain_hi ({self.domain_hi}) must exceed domain_lo ({self.domain_lo})")
        if int(self.n_basis) != self.n_basis or self.n_basis < ORDER:
            raise TooFewBasis(f"n_basis must be an integer >= {ORDER}, got {self.n_basis}")
        object.__setattr__(self, "domain_lo", float(self.domain_lo))
        object.__setattr__(self, "domain_hi", float(self.domain_hi))
        object.__setattr__(self, "n_basis", int(self.n_basis))

    @property
    def order(self):
        return ORDER

    @property
    def domain(self):
        return (self.domain_lo, self.domain_hi)

    @cached_property
    def interior_knots(self):
        n_int = self.n_basis - ORDER
        return np.linspace(self.domain_lo, self.domain_hi, n_int + 2)[1:-1]

    @cached_property
    def knots(self):
        return np.concatenate(
            [
                np.full(ORDER, self.domain_lo),
                self.interior_knots,
                np.full(ORDER, self.domain_hi),
            ]
        )

    @cached_property
    def breaks(self):
        return np.concatenate([[self.domain_lo], self.interior_knots, [self.domain_hi]])

    def _check_points(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if not np.all(np.isfinite(x)):
            raise PointOutOfDomain("evaluation points must be finite")
        slack = _DOMAIN_SLACK * (self.domain_hi - self.domain_lo)
        if x.size and (x.min() < self.domain_lo - slack or x.max() > self.domain_hi + slack):
            raise PointOutOfDomain(
                f"points must lie in [{self.domain_lo}, {self.domain_hi}], got range [{x.min()}, {x.max()}]"
            )
        return np.clip(x, self.domain_lo, self.domain_hi)

    def evaluate(self, x, deriv=0):
        """Design matrix ``Z[j, k] = B_k^(deriv)(x_j)``."""
        return design_matrix(self.knots, DEGREE, self._check_points(x), deriv)

    def _quadrature(self, n_nodes):
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        a, b = self.breaks[:-1], self.breaks[1:]
        half = (b - a) / 2
        pts = (a[:, None] + half[:, None] * (nodes[None, :] + 1)).ravel()
        wts = (half[:, None] * weights[None, :]).ravel()
        return pts, wts

    @cached_property
    def penalty(self):
        """Roughness penalty ``S_ij = int B_i'' B_j''`` (exact Gauss quadrature per knot span)."""
        pts, wts = self._quadrature(3)
        d2 = self.evaluate(pts, deriv=2)
        s = d2.T @ (wts[:, None] * d2)
        return (s + s.T) / 2

    @cached_property
    def gram(self):
        """Gram matrix ``W_ij = int B_i B_j`` (exact for degree-6 integrands)."""
        pts, wts = self._quadrature(4)
        z = self.evaluate(pts)
        w = z.T @ (wts[:, None] * z)
        return (w + w.T) / 2

    @cached_property
    def penalty_root(self):
        # triangular R with R.T @ R == penalty, built from the quadrature
        # factor directly so linear functions stay in the exact null space
        pts, wts = self._quadrature(3)
        root = np.sqrt(wts)[:, None] * self.evaluate(pts, deriv=2)
        return np.linalg.qr(root, mode="r")

    def same_as(self, other):
        return (
            isinstance(other, BSplineBasis)
            and self.n_basis == other.n_basis
            and self.domain_lo == other.domain_lo
            and self.domain_hi == other.domain_hi
        )

    def to_dict(self):
        return {"domain_lo": self.domain_lo, "domain_hi": self.domain_hi, "n_basis": self.n_basis, "order": ORDER}

    @classmethod
    def from_dict(cls, d):
        return cls(d["domain_lo"], d["domain_hi"], d["n_basis"])


def make_basis(domain_lo, domain_hi, n_basis):
    return BSplineBasis(domain_lo, domain_hi, n_basis)


def eval_basis(basis, grid):
    return basis.evaluate(grid)


def penalty_matrix(basis):
    return basis.penalty


@dataclass(frozen=True)
class SmoothFit:
    """Result of a penalized fit.

    ``coefficients`` is ``(K,)`` for a single curve and ``(K, n)`` for a
    batch. ``lam``, ``gcv`` and ``dof`` are scalars for a single curve or a
    common λ, and length-``n`` arrays when λ was selected per column.
    """

    coefficients: np.ndarray
    lam: object
    gcv: object
    dof: object


def _as_columns(values):
    y = np.asarray(values, dtype=float)
    if y.ndim == 1:
        return y[:, None], True
    if y.ndim != 2:
        raise ValueError("values must be a vector or a (g, n) matrix")
    return y, False


def _factor(z, basis, lam):
    g, k = z.shape
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be finite and nonnegative, got {lam}")
    if lam == 0:
        if g < k:
            raise SingularSystem(f"{g} points cannot determine {k} coefficients without a penalty")
        m = z
    else:
        m = np.vstack([z, np.sqrt(lam) * basis.penalty_root])
    q, r = np.linalg.qr(m)
    diag = np.abs(np.diag(r))
    if diag.max() == 0 or diag.min() < PIVOT_TOL * diag.max():
        raise SingularSystem(f"penalized system is rank deficient at lambda={lam}")
    return q[:g], r


def _solve(z, basis, lam, y):
    q1, r = _factor(z, basis, lam)
    coef = solve_triangular(r, q1.T @ y)
    dof = float(np.sum(q1 * q1))
    resid = y - z @ coef
    sse = np.sum(resid * resid, axis=0)
    return coef, dof, sse


def gcv_score(sse, dof, g):
    """Craven-Wahba criterion ``(SSE/g) / (1 - dof/g)^2``; infinite at dof >= g."""
    denom = (1.0 - dof / g) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(dof < g * (1 - 1e-10), (np.asarray(sse) / g) / denom, np.inf)
    return out


def smooth_penalized(grid, values, basis, lam):
    """Penalized least squares ``(Z'Z + lam S)^-1 Z'y`` for one curve or a batch.

    A matrix of values shares a single factorization across its columns.
    """
    y, single = _as_columns(values)
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("values contain NaN or infinity")
    z = basis.evaluate(grid)
    if z.shape[0] != y.shape[0]:
        raise ValueError(f"grid has {z.shape[0]} points but values have {y.shape[0]} rows")
    coef, dof, sse = _solve(z, basis, float(lam), y)
    gcv = gcv_score(sse, dof, z.shape[0])
    if single:
        return SmoothFit(coef[:, 0], float(lam), float(gcv[0]), dof)
    return SmoothFit(coef, float(lam), gcv, dof)


def _gcv_path(z, basis, lambda_grid, y):
    g = z.shape[0]
    n_lam = len(lambda_grid)
    coefs = np.full((n_lam, z.shape[1], y.shape[1]), np.nan)
    gcvs = np.full((n_lam, y.shape[1]), np.inf)
    dofs = np.full(n_lam, np.nan)
    solved = np.zeros(n_lam, dtype=bool)
    for i, lam in enumerate(lambda_grid):
        try:
            coef, dof, sse = _solve(z, basis, float(lam), y)
        except SingularSystem:
            continue
        solved[i] = True
        coefs[i], dofs[i] = coef, dof
        gcvs[i] = gcv_score(sse, dof, g)
    if not solved.any():
        raise SingularSystem("penalized system is singular for every lambda in the grid")
    gcvs = np.where(np.isfinite(gcvs), gcvs, np.inf)
    return coefs, gcvs, dofs


def _argmin_prefer_smooth(gcvs, order):
    # gcvs: (n_lam, n); ties go to the largest lambda
    best = np.min(gcvs, axis=0)
    hit = gcvs == best[None, :]
    ranked = np.where(hit, order[:, None], -1)
    return np.argmax(ranked, axis=0)


def select_lambda_gcv(grid, values, basis, lambda_grid=None):
    """Fit at the GCV-minimizing λ of ``lambda_grid``.

    For a ``(g, n)`` matrix the λ is chosen column by column, each column
    reusing the factorization computed once per λ.
    """
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(basis.domain_lo, basis.domain_hi)
    lambda_grid = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if lambda_grid.size == 0:
        raise EmptyGrid("lambda_grid is empty")
    y, single = _as_columns(values)
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("values contain NaN or infinity")
    z = basis.evaluate(grid)
    coefs, gcvs, dofs = _gcv_path(z, basis, lambda_grid, y)
    if not np.all(np.isfinite(gcvs.min(axis=0))):
        raise AllGcvNonFinite("GCV is not finite for any lambda in the grid")
    order = np.argsort(np.argsort(lambda_grid, kind="stable"), kind="stable")
    idx = _argmin_prefer_smooth(gcvs, order)
    cols = np.arange(y.shape[1])
    coef = coefs[idx, :, cols].T
    lam = lambda_grid[idx]
    gcv = gcvs[idx, cols]
    dof = dofs[idx]
    if single:
        return SmoothFit(coef[:, 0], float(lam[0]), float(gcv[0]), float(dof[0]))
    return SmoothFit(coef, lam, gcv, dof)


def project(grid, values, basis):
    """Unpenalized least-squares projection onto the basis (λ = 0)."""
    return smooth_penalized(grid, values, basis, 0.0).coefficients
