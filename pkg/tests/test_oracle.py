"""Independent reference solvers and the frozen values they certify."""

import numpy as np
import pytest

from komatu_loewner.geometry import SlitConfig
from komatu_loewner.oracle import (Boxcar, fd_bmd_solve, fd_flux_period, fd_kstar, hit_probability,
                                   mc_green, walk_to_boundary)

GOLDEN = SlitConfig([1.0], [-1.0], [1.0])
A11 = 4.231557941849025
PHI1_2I = 0.6353113
GD_2I_3I = 0.37836927862687214
KSTAR_3I_0 = 0.10289072608133008


def test_boxcar_poisson_integral_is_exact():
    b = Boxcar(-1.0, 1.0, 1.0)
    z = 0.0 + 1j
    # harmonic measure of [-1, 1] seen from i is 1/2
    assert float(b.poisson(z)) == pytest.approx(0.5, abs=1e-14)


def test_walkers_stop_on_the_boundary():
    hit, p = walk_to_boundary(GOLDEN, 2j, 500, seed=3)
    assert set(np.unique(hit)) <= {-1, 0}
    assert np.all(np.abs(p[hit == -1].imag) == 0)
    assert np.allclose(p[hit == 0].imag, 1.0)


def test_mc_is_seed_deterministic():
    a = hit_probability(GOLDEN, 2j, 0, n_paths=2000, rng_seed=5)
    b = hit_probability(GOLDEN, 2j, 0, n_paths=2000, rng_seed=5)
    assert a.estimate == b.estimate


@pytest.mark.slow
def test_mc_certifies_harmonic_measure():
    r = hit_probability(GOLDEN, 2j, 0, n_paths=100_000, rng_seed=11)
    assert r.within(PHI1_2I, 3.0)


@pytest.mark.slow
def test_mc_certifies_green_function():
    r = mc_green(GOLDEN, 2j, 3j, n_paths=100_000, rng_seed=12)
    assert r.within(GD_2I_3I, 3.0)


@pytest.mark.slow
def test_fd_certifies_kstar():
    est, err = fd_kstar(GOLDEN, [3j], 0.0)
    assert abs(est[0] - KSTAR_3I_0) <= max(3 * err[0], 1e-4)


@pytest.mark.slow
def test_fd_certifies_period_matrix():
    A = fd_flux_period(GOLDEN)
    assert A[0, 0] == pytest.approx(A11, rel=0.02)


@pytest.mark.slow
def test_fd_maximum_principle():
    sol = fd_bmd_solve(GOLDEN, Boxcar(-0.5, 0.5, 1.0))
    assert all(level.max_principle_ok for level in sol.levels)
    v = sol.value(np.array([0.3 + 0.4j, 2 + 2j]))
    assert np.all((v > 0) & (v < 1))
