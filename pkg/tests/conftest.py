import numpy as np
import pytest

from mfcharts.mfd import mfd_from_grid
from mfcharts.simgen import SimConfig, simulate_mfd


def random_curves(rng, n, p, g=60, k_true=8):
    """Smooth random curves on (0, 1): a few random Fourier terms plus noise."""
    t = np.linspace(0, 1, g)
    out = []
    for _ in range(p):
        coef = rng.normal(size=(n, k_true)) / np.arange(1, k_true + 1)
        basis = np.stack([np.cos(np.pi * j * t) for j in range(k_true)])
        out.append(coef @ basis + 0.01 * rng.normal(size=(n, g)))
    return t, out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_mfd():
    rng = np.random.default_rng(7)
    t, mats = random_curves(rng, 40, 3)
    return mfd_from_grid(t, {"A": mats[0], "B": mats[1], "C": mats[2]}, n_basis=12)


@pytest.fixture(scope="session")
def sim_small():
    """Reference and tuning sets of 200 in-control observations."""
    return simulate_mfd(SimConfig(nobs=200, seed=3)), simulate_mfd(SimConfig(nobs=200, seed=4))


@pytest.fixture(scope="session")
def sim_small_mfd(sim_small):
    ref, tun = sim_small
    x = mfd_from_grid(ref.grid, ref.covariates(), n_basis=20)
    y = mfd_from_grid(ref.grid, {"Y": ref.Y}, n_basis=20)
    xt = mfd_from_grid(tun.grid, tun.covariates(), n_basis=20)
    yt = mfd_from_grid(tun.grid, {"Y": tun.Y}, n_basis=20)
    return {"x": x, "y": y, "ys": ref.y_scalar, "xt": xt, "yt": yt, "yst": tun.y_scalar}


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
