import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.interpolate import BSpline

from mfcharts.basis import (
    BSplineBasis,
    default_lambda_grid,
    gcv_score,
    select_lambda_gcv,
    smooth_penalized,
)
from mfcharts.errors import (
    EmptyGrid,
    InvalidDomain,
    NonFiniteInput,
    PointOutOfDomain,
    SingularSystem,
    TooFewBasis,
)


def greville(basis):
    t = basis.knots
    return np.array([t[k + 1 : k + 4].mean() for k in range(basis.n_basis)])


def dense_fit(z, s, lam, y):
    # independent route: dense normal equations instead of the stacked QR
    return np.linalg.solve(z.T @ z + lam * s, z.T @ y)


def test_knots_are_clamped_and_equally_spaced():
    b = BSplineBasis(2.0, 5.0, 10)
    assert b.knots.size == 14
    assert np.all(b.knots[:4] == 2.0) and np.all(b.knots[-4:] == 5.0)
    # 10 - 4 interior knots give 7 equal spans
    np.testing.assert_allclose(np.diff(b.breaks), 3.0 / 7.0)


@settings(max_examples=30, deadline=None)
@given(n_basis=st.integers(4, 30), lo=st.floats(-5, 5), width=st.floats(0.1, 10))
def test_partition_of_unity(n_basis, lo, width):
    b = BSplineBasis(lo, lo + width, n_basis)
    x = np.linspace(lo, lo + width, 123)
    np.testing.assert_allclose(b.evaluate(x).sum(axis=1), 1.0, atol=1e-12)


def test_evaluate_matches_scipy():
    b = BSplineBasis(0.0, 2.0, 13)
    x = np.linspace(0, 2, 81)[:-1]
    spl = BSpline(b.knots, np.eye(13), 3)
    np.testing.assert_allclose(b.evaluate(x), spl(x), atol=1e-13)
    np.testing.assert_allclose(b.evaluate(x, deriv=2), spl.derivative(2)(x), atol=1e-9)


def test_penalty_and_gram_match_adaptive_quadrature():
    b = BSplineBasis(0.0, 1.0, 7)
    spl = BSpline(b.knots, np.eye(7), 3)
    d2 = spl.derivative(2)
    s = np.empty((7, 7))
    w = np.empty((7, 7))
    for i in range(7):
        for j in range(7):
            pts = list(b.interior_knots)
            s[i, j] = integrate.quad(lambda u: d2(u)[i] * d2(u)[j], 0, 1, points=pts, limit=200)[0]
            w[i, j] = integrate.quad(lambda u: spl(u)[i] * spl(u)[j], 0, 1, points=pts, limit=200)[0]
    np.testing.assert_allclose(b.penalty, s, atol=1e-8 * np.abs(s).max())
    np.testing.assert_allclose(b.gram, w, atol=1e-12)


def test_penalty_properties():
    b = BSplineBasis(-1.0, 3.0, 15)
    s = b.penalty
    np.testing.assert_array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() > -1e-9 * np.abs(s).max()
    # constants and lines lie in the null space
    for c in (np.ones(15), greville(b)):
        assert abs(c @ s @ c) < 1e-8 * np.abs(s).max()
    r = b.penalty_root
    np.testing.assert_allclose(r.T @ r, s, atol=1e-9 * np.abs(s).max())


def test_gram_integrates_products():
    b = BSplineBasis(0.0, 1.0, 10)
    ones = np.ones(10)
    assert ones @ b.gram @ ones == pytest.approx(1.0, abs=1e-14)
    # int t^2 = 1/3 with the Greville coefficients of t
    g = greville(b)
    assert g @ b.gram @ g == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_penalty_scales_with_domain_length():
    s1 = BSplineBasis(0.0, 1.0, 9).penalty
    s2 = BSplineBasis(0.0, 4.0, 9).penalty
    np.testing.assert_allclose(s2, s1 / 4.0**3, rtol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_penalized_fit_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(5, 20))
    b = BSplineBasis(0.0, float(rng.uniform(0.5, 3)), k)
    g = int(rng.integers(k + 2, 120))
    x = np.sort(rng.uniform(b.domain_lo, b.domain_hi, g))
    y = np.sin(3 * x) + rng.normal(scale=0.2, size=g)
    lam = 10 ** rng.uniform(-6, 0)
    fit = smooth_penalized(x, y, b, lam)
    z = b.evaluate(x)
    np.testing.assert_allclose(fit.coefficients, dense_fit(z, b.penalty, lam, y), atol=1e-9)
    hat = z @ np.linalg.solve(z.T @ z + lam * b.penalty, z.T)
    assert fit.dof == pytest.approx(np.trace(hat), rel=1e-9)


def test_large_lambda_gives_straight_line():
    rng = np.random.default_rng(1)
    b = BSplineBasis(0.0, 1.0, 12)
    x = np.linspace(0, 1, 60)
    y = np.exp(x) + rng.normal(scale=0.1, size=60)
    fit = smooth_penalized(x, y, b, 1e12)
    line = np.polyval(np.polyfit(x, y, 1), x)
    np.testing.assert_allclose(b.evaluate(x) @ fit.coefficients, line, atol=1e-4)
    assert fit.dof == pytest.approx(2.0, abs=1e-4)


def test_batch_equals_loop():
    rng = np.random.default_rng(2)
    b = BSplineBasis(0.0, 1.0, 10)
    x = np.linspace(0, 1, 40)
    y = rng.normal(size=(40, 5))
    batch = smooth_penalized(x, y, b, 1e-3).coefficients
    for j in range(5):
        np.testing.assert_allclose(batch[:, j], smooth_penalized(x, y[:, j], b, 1e-3).coefficients, atol=1e-13)


def test_gcv_formula():
    assert float(gcv_score(2.0, 5.0, 10)) == pytest.approx((2.0 / 10) / 0.25)
    assert np.isinf(gcv_score(1.0, 10.0, 10))


def test_gcv_selection_is_argmin_over_grid():
    rng = np.random.default_rng(3)
    b = BSplineBasis(0.0, 1.0, 15)
    x = np.linspace(0, 1, 80)
    y = np.sin(6 * x) + rng.normal(scale=0.3, size=80)
    grid = np.logspace(-8, 1, 12)
    fit = select_lambda_gcv(x, y, b, grid)
    scores = [smooth_penalized(x, y, b, lam).gcv for lam in grid]
    assert fit.lam == grid[int(np.argmin(scores))]
    assert fit.gcv == pytest.approx(min(scores))


def test_gcv_tie_prefers_larger_lambda():
    # zero data: every lambda gives GCV exactly 0
    b = BSplineBasis(0.0, 1.0, 8)
    x = np.linspace(0, 1, 30)
    grid = np.array([1e-2, 1e-6, 1.0, 1e-4])
    fit = select_lambda_gcv(x, np.zeros(30), b, grid)
    assert fit.lam == 1.0


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_gcv_choice_invariant_to_response_scale(scale, seed):
    rng = np.random.default_rng(seed)
    b = BSplineBasis(0.0, 1.0, 12)
    x = np.linspace(0, 1, 50)
    y = np.cos(4 * x) + rng.normal(scale=0.2, size=50)
    a = select_lambda_gcv(x, y, b)
    c = select_lambda_gcv(x, scale * y, b)
    assert a.lam == c.lam
    np.testing.assert_allclose(c.coefficients, scale * a.coefficients, rtol=1e-8, atol=1e-12 * scale)


def test_per_column_selection_matches_single():
    rng = np.random.default_rng(4)
    b = BSplineBasis(0.0, 1.0, 12)
    x = np.linspace(0, 1, 50)
    y = np.stack([np.sin(2 * x), np.sin(9 * x), x], axis=1) + rng.normal(scale=0.1, size=(50, 3))
    batch = select_lambda_gcv(x, y, b)
    for j in range(3):
        one = select_lambda_gcv(x, y[:, j], b)
        assert batch.lam[j] == one.lam
        np.testing.assert_allclose(batch.coefficients[:, j], one.coefficients, atol=1e-12)


def test_default_lambda_grid_scales_with_domain():
    np.testing.assert_allclose(default_lambda_grid(0, 2), default_lambda_grid(0, 1) * 8)
    assert default_lambda_grid(0, 1).size == 10


def test_errors():
    with pytest.raises(TooFewBasis):
        BSplineBasis(0, 1, 3)
    with pytest.raises(InvalidDomain):
        BSplineBasis(1, 1, 5)
    b = BSplineBasis(0, 1, 6)
    with pytest.raises(PointOutOfDomain):
        b.evaluate([1.5])
    with pytest.raises(NonFiniteInput):
        smooth_penalized(np.linspace(0, 1, 10), np.r_[np.nan, np.zeros(9)], b, 1.0)
    with pytest.raises(SingularSystem):
        smooth_penalized(np.linspace(0, 1, 4), np.zeros(4), b, 0.0)
    with pytest.raises(EmptyGrid):
        select_lambda_gcv(np.linspace(0, 1, 10), np.zeros(10), b, [])
    with pytest.raises(ValueError):
        smooth_penalized(np.linspace(0, 1, 10), np.zeros(10), b, -1.0)


def test_roundtrip_dict():
    b = BSplineBasis(0.5, 2.5, 11)
    assert BSplineBasis.from_dict(b.to_dict()).same_as(b)
