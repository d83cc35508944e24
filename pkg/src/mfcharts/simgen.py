"""Synthetic multivariate functional data with known eigenstructure.

Three covariates on (0, 1) are truncated Karhunen-Loeve sums over 50
multivariate eigenfunctions ``psi_m = a_m f_m``, with ``f_m`` the
orthonormal Fourier system and ``a_m`` a unit 3-vector rotating with
``m``. A scalar response is linear in the first 10 scores, a functional
response is linear in them through a banded coefficient matrix, and mean
shifts of four shapes can be injected into any variable.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidShiftType, UnsupportedR2

N_GRID = 150
N_COMPONENTS = 50
N_ACTIVE = 10
NOISE_SD = 0.05
TOTAL_VARIANCE = 3.0
DECAY = 0.7
FOF_ERROR_SHARE = 0.3
FOF_DECAY = 0.8

# scalar-response coefficient b_l (l <= 10) for each supported R^2
B_CONSTANTS = {0.97: 0.587709, 0.86: 0.5533828, 0.74: 0.5133249}

# shift scale per unit severity, calibrated so that the default Phase-II
# groups are detected at rates of roughly 17/20 (see README)
KAPPA_X = 0.22
KAPPA_Y = 7.0

SHIFT_TYPES = ("none", "A", "B", "C", "D")
COVARIATES = ("X1", "X2", "X3")


def grid():
    return np.linspace(0.0, 1.0, N_GRID)


def fourier(m, t):
    """Orthonormal Fourier function number ``m`` (1-based) on (0, 1)."""
    t = np.asarray(t, dtype=float)
    if m == 1:
        return np.ones_like(t)
    k = m // 2
    if m % 2 == 0:
        return np.sqrt(2.0) * np.sin(2 * np.pi * k * t)
    return np.sqrt(2.0) * np.cos(2 * np.pi * k * t)


def loadings(n_components=N_COMPONENTS):
    """Unit vectors ``a_m`` proportional to ``(cos th, sin th, cos 2 th)``, ``th = m pi / 7``."""
    th = np.arange(1, n_components + 1) * np.pi / 7
    a = np.stack([np.cos(th), np.sin(th), np.cos(2 * th)], axis=1)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def eigenvalues(n_components=N_COMPONENTS):
    """``c * 0.7**m`` scaled so the 50 values sum to 3."""
    raw = DECAY ** np.arange(1, n_components + 1)
    return raw * TOTAL_VARIANCE / raw.sum()


def eigenfunctions(t=None):
    """Generator eigenfunctions on ``t``, shape ``(N_COMPONENTS, len(t), 3)``."""
    t = grid() if t is None else np.asarray(t, dtype=float)
    f = np.stack([fourier(m, t) for m in range(1, N_COMPONENTS + 1)])
    return f[:, :, None] * loadings()[:, None, :]


def fof_matrix():
    """Banded ``b_lm = 0.8**max(l, m)`` for ``|l - m| <= 1``, ``l, m <= 10``."""
    idx = np.arange(1, N_ACTIVE + 1)
    l, m = np.meshgrid(idx, idx, indexing="ij")
    return np.where(np.abs(l - m) <= 1, FOF_DECAY ** np.maximum(l, m), 0.0)


def shift_shape(kind, t):
    """Unit-severity mean shift: A curvature, B slope, C translation, D = A + B."""
    t = np.asarray(t, dtype=float)
    if kind == "none":
        return np.zeros_like(t)
    if kind == "A":
        return t * (1 - t) - 1.0 / 6.0
    if kind == "B":
        return t - 0.5
    if kind == "C":
        return np.ones_like(t)
    if kind == "D":
        return shift_shape("A", t) + shift_shape("B", t)
    raise InvalidShiftType(f"shift type must be one of {SHIFT_TYPES}, got {kind!r}")


def scalar_error_variance(r2):
    """``sum_{l<=10} b^2 lambda_l * (1 - R2) / R2``: makes the population R^2 exact."""
    b = _b_constant(r2)
    signal = b**2 * eigenvalues()[:N_ACTIVE].sum()
    return signal * (1.0 - r2) / r2


def _b_constant(r2):
    for key, val in B_CONSTANTS.items():
        if abs(r2 - key) < 1e-12:
            return val
    raise UnsupportedR2(f"r2 must be one of {sorted(B_CONSTANTS)}, got {r2}")


@dataclass(frozen=True)
class SimConfig:
    nobs: int = 1000
    r2: float = 0.97
    shift_type_x1: str = "none"
    shift_type_x2: str = "none"
    shift_type_x3: str = "none"
    shift_type_y: str = "none"
    d_x1: float = 0.0
    d_x2: float = 0.0
    d_x3: float = 0.0
    d_y: float = 0.0
    d_y_scalar: float = 0.0
    seed: int = 0
    kappa_x: float = KAPPA_X
    kappa_y: float = KAPPA_Y

    def validate(self):
        _b_constant(self.r2)
        for name in ("shift_type_x1", "shift_type_x2", "shift_type_x3", "shift_type_y"):
            if getattr(self, name) not in SHIFT_TYPES:
                raise InvalidShiftType(f"{name} must be one of {SHIFT_TYPES}, got {getattr(self, name)!r}")
        sev = [self.d_x1, self.d_x2, self.d_x3, self.d_y, self.d_y_scalar, self.kappa_x, self.kappa_y]
        if not np.all(np.isfinite(sev)):
            raise ValueError("severities must be finite")
        if int(self.nobs) != self.nobs or self.nobs < 1:
            raise ValueError(f"nobs must be a positive integer, got {self.nobs}")


@dataclass
class SimDataset:
    """Matrices of shape ``(nobs, 150)`` plus the scalar response.

    ``scores`` holds the true covariate scores ``(nobs, 50)``.
    """

    X1: np.ndarray
    X2: np.ndarray
    X3: np.ndarray
    Y: np.ndarray
    y_scalar: np.ndarray
    scores: np.ndarray = field(repr=False)
    grid: np.ndarray = field(default_factory=grid, repr=False)

    @property
    def nobs(self):
        return self.y_scalar.size

    def covariates(self):
        return {"X1": self.X1, "X2": self.X2, "X3": self.X3}

    def functional(self):
        return {"X1": self.X1, "X2": self.X2, "X3": self.X3, "Y": self.Y}

    def rows(self, idx):
        idx = np.asarray(idx)
        return SimDataset(
            self.X1[idx], self.X2[idx], self.X3[idx], self.Y[idx], self.y_scalar[idx], self.scores[idx], self.grid
        )


def concat_datasets(items):
    items = list(items)
    return SimDataset(
        *(np.concatenate([getattr(it, k) for it in items]) for k in ("X1", "X2", "X3", "Y", "y_scalar", "scores")),
        grid=items[0].grid,
    )


def _simulate(config, stream):
    config.validate()
    t = grid()
    psi = eigenfunctions(t)  # (50, g, 3)
    f = np.stack([fourier(m, t) for m in range(1, N_COMPONENTS + 1)])
    lam = eigenvalues()
    b = _b_constant(config.r2)
    sd_eps = np.sqrt(scalar_error_variance(config.r2))
    bmat = fof_matrix()
    n, g = int(config.nobs), t.size
    scores = np.empty((n, N_COMPONENTS))
    eps = np.empty(n)
    y_err = np.empty((n, N_COMPONENTS))
    noise_x = np.empty((n, g, 3))
    noise_y = np.empty((n, g))
    for i in range(n):
        # one independent stream per observation, keyed by (stream, i)
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(stream, i)))
        scores[i] = rng.normal(size=N_COMPONENTS) * np.sqrt(lam)
        eps[i] = rng.normal() * sd_eps
        y_err[i] = rng.normal(size=N_COMPONENTS) * np.sqrt(FOF_ERROR_SHARE * lam)
        noise_x[i] = rng.normal(size=(g, 3)) * NOISE_SD
        noise_y[i] = rng.normal(size=g) * NOISE_SD
    x = np.einsum("im,mgp->igp", scores, psi) + noise_x
    y_scalar = b * scores[:, :N_ACTIVE].sum(axis=1) + eps
    y_scores = y_err.copy()
    y_scores[:, :N_ACTIVE] += scores[:, :N_ACTIVE] @ bmat
    y_fun = y_scores @ f + noise_y
    for p, name in enumerate(COVARIATES):
        d = getattr(config, f"d_x{p + 1}")
        kind = getattr(config, f"shift_type_x{p + 1}")
        x[:, :, p] = x[:, :, p] + d * config.kappa_x * shift_shape(kind, t)
    y_fun = y_fun + config.d_y * config.kappa_y * shift_shape(config.shift_type_y, t)
    y_scalar = y_scalar + config.d_y_scalar
    return SimDataset(x[:, :, 0], x[:, :, 1], x[:, :, 2], y_fun, y_scalar, scores, t)


def simulate_mfd(config=None, **kwargs):
    """Simulate one data set; keyword arguments override fields of ``config``."""
    config = replace(config or SimConfig(), **kwargs)
    return _simulate(config, 0)


def simulate_scenario(seed=0, nobs_I=1000, nobs_tun=1000, nobs_II=60, kappa_x=KAPPA_X, kappa_y=KAPPA_Y):
    """Reference, tuning and three-group Phase-II data sets.

    The Phase-II set has equal thirds: in control; X3 shift A with
    severity 20, scalar response +1 and Y shift D with severity 0.5; and
    X3 shift A with severity 40, scalar response +2 and Y shift D with
    severity 1.5.
    """
    base = SimConfig(seed=seed, kappa_x=kappa_x, kappa_y=kappa_y, shift_type_x3="A", shift_type_y="D")
    size = nobs_II // 3
    groups = [
        replace(base, nobs=size),
        replace(base, nobs=size, d_x3=20.0, d_y_scalar=1.0, d_y=0.5),
        replace(base, nobs=nobs_II - 2 * size, d_x3=40.0, d_y_scalar=2.0, d_y=1.5),
    ]
    dat_ii = concat_datasets(_simulate(cfg, 3 + j) for j, cfg in enumerate(groups))
    return {
        "datI": _simulate(replace(base, nobs=nobs_I), 1),
        "datI_tun": _simulate(replace(base, nobs=nobs_tun), 2),
        "datII": dat_ii,
    }
