import numpy as np
import pytest

from komatu_loewner.geometry import SlitConfig
from komatu_loewner.kernel import build_kernel
from komatu_loewner.potential import (BMDGreen, LayerSolver, green_d, green_h, harmonic_basis,
                                      kstar_via_green, period_matrix, solve_green)

# frozen values for the unit slit at height 1, each checked against an
# independent oracle in test_oracle.py
A11 = 4.231557941849025            # finite differences: 4.23202
PHI1_2I = 0.6353113                 # walk-on-spheres: 0.63752 +- 0.00152
GD_2I_3I = 0.37836927862687214     # walk-on-spheres: 0.37879 +- 0.00032
KSTAR_3I_0 = 0.10289072608133008


def test_green_h_symmetry_and_boundary():
    z, w = 0.3 + 0.8j, -1 + 2j
    assert green_h(z, w) == pytest.approx(green_h(w, z))
    assert green_h(2.0 + 0j, w) == pytest.approx(0.0, abs=1e-15)


def test_green_d_vanishes_on_boundary(golden):
    layer = solve_green(golden, 0.5 + 2j)
    x = np.linspace(-0.95, 0.95, 9)
    assert np.abs(green_d(layer, x + 1j)).max() < 1e-7
    assert np.abs(green_d(layer, np.array([-3.0, 0.0, 4.0]) + 0j)).max() < 1e-7


def test_green_d_frozen_and_symmetric(golden):
    a = green_d(solve_green(golden, 3j), 2j)
    b = green_d(solve_green(golden, 2j), 3j)
    assert a == pytest.approx(GD_2I_3I, abs=1e-9)
    assert a == pytest.approx(b, abs=1e-9)


def test_harmonic_measure_frozen(golden):
    phi = harmonic_basis(golden)
    assert float(phi[0](2j)) == pytest.approx(PHI1_2I, abs=1e-6)
    assert float(phi[0](0.3 + 1j)) == pytest.approx(1.0, abs=1e-7)


def test_period_matrix_frozen(golden):
    A = period_matrix(golden, harmonic_basis(golden))
    assert A[0, 0] == pytest.approx(A11, rel=1e-8)


def test_period_matrix_is_symmetric_positive():
    s = SlitConfig([1.0, 3.0], [0.0, 0.0], [1.0, 1.0])
    A = period_matrix(s, harmonic_basis(s))
    assert A == pytest.approx(A.T, abs=1e-7)
    assert np.all(np.linalg.eigvalsh(0.5 * (A + A.T)) > 0)
    # off-diagonal fluxes are negative: raising one slit pulls flux from the other
    assert A[0, 1] < 0


def test_green_star_is_constant_on_each_slit(two_slits):
    g = BMDGreen.build(two_slits)
    w = 0.2 + 0.6j
    for j in range(two_slits.n):
        x = np.linspace(two_slits.x_left[j] + 0.05, two_slits.x_right[j] - 0.05, 7)
        vals = g.green_star(x + 1j * two_slits.y[j], w)
        assert np.ptp(vals) < 1e-7


def test_kstar_two_routes_agree(golden):
    via_green = float(kstar_via_green(golden, 3j, 0.0))
    assert via_green == pytest.approx(KSTAR_3I_0, abs=1e-8)
    direct = build_kernel(golden, 1.3).eval_kstar(0.4 + 2j)
    assert float(kstar_via_green(golden, 0.4 + 2j, 1.3)) == pytest.approx(float(direct), abs=1e-8)
