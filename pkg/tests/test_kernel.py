import numpy as np
import pytest

from komatu_loewner.geometry import SheetPoint, SlitConfig
from komatu_loewner.kernel import (KernelSolver, PoissonKernelModel, ResidualExceeded, build_kernel,
                                   build_measure_kernel, eval_kstar, eval_psi, koebe_bound_check,
                                   kstar_total_mass, psi_half_plane, residue_at_infinity)
from komatu_loewner.measures import BoundaryMeasure

# K*(3i, 0) for the unit slit at height 1; the finite-difference oracle gives
# 0.10288899 +- 4.7e-5 (see test_oracle.py)
KSTAR_3I_0 = 0.10289072608133008


def test_empty_domain_is_half_plane():
    m = build_kernel(SlitConfig.empty(), 0.5)
    z = np.array([1 + 1j, -2 + 0.3j])
    assert m.psi(z) == pytest.approx(psi_half_plane(z, 0.5), abs=1e-15)
    assert eval_kstar(m, 1j) == pytest.approx(1 / (np.pi * 1.25))


def test_kstar_frozen_value(golden):
    m = build_kernel(golden, 0.0)
    assert m.residual < 1e-8
    assert eval_kstar(m, 3j) == pytest.approx(KSTAR_3I_0, abs=1e-9)


def test_boundary_conditions(golden):
    m = build_kernel(golden, 0.4)
    x = np.linspace(-0.99, 0.99, 41)
    z = x + 1j
    # Im Psi is constant along the slit on both edges
    for edge in (+1, -1):
        k = m.psi(z, edge=edge).imag
        assert np.ptp(k) < 1e-9
    # Im Psi vanishes on R away from the pole
    xr = np.array([-5.0, -1.0, 2.0, 7.0])
    assert np.abs(m.psi(xr + 1e-12j).imag).max() < 1e-9


def test_zero_flux_around_slit(golden):
    # outward flux of grad K* through an ellipse enclosing the slit, by
    # central differences of Im Psi along the normal
    m = build_kernel(golden, 0.7)
    th = np.linspace(0, 2 * np.pi, 4001)[:-1]
    z = 1j + 1.5 * np.cos(th) + 0.5j * np.sin(th)
    dz = -1.5 * np.sin(th) + 0.5j * np.cos(th)
    normal = -1j * dz / np.abs(dz)
    h = 1e-5
    dn = (m.psi(z + h * normal).imag - m.psi(z - h * normal).imag) / (2 * h)
    flux = np.sum(dn * np.abs(dz)) * (th[1] - th[0])
    assert abs(flux) < 1e-6


def test_residual_failure_is_raised(golden):
    with pytest.raises(ResidualExceeded):
        build_kernel(golden, 0.0, degree=2, tol=1e-8)


def test_multi_pole_solver_matches_single(golden):
    sol = KernelSolver(golden, 24)
    xis = np.array([-2.0, 0.0, 1.5])
    z = np.array([0.3 + 2j, 4 + 0.5j])
    multi = sol.psi_points(z, xis)
    for k, xi in enumerate(xis):
        assert multi[:, k] == pytest.approx(build_kernel(golden, xi).psi(z), abs=1e-12)


def test_measure_kernel_is_linear(golden):
    mu = BoundaryMeasure.atoms([0.0, 1.0], [0.25, 0.75])
    m = build_measure_kernel(golden, mu)
    z = 0.5 + 2.5j
    lin = 0.25 * build_kernel(golden, 0.0).psi(z) + 0.75 * build_kernel(golden, 1.0).psi(z)
    assert m.psi(z) == pytest.approx(lin, abs=1e-12)


def test_total_mass_is_one(golden):
    for z in (3j, 0.5 + 0.3j, 2 + 1j):
        assert kstar_total_mass(golden, z) == pytest.approx(1.0, abs=1e-10)


def test_residue_at_infinity(golden):
    res, err = residue_at_infinity(build_kernel(golden, 0.3))
    assert res == pytest.approx(-1 / np.pi, abs=1e-4)


def test_koebe_bound(golden):
    rep = koebe_bound_check(build_kernel(golden, 0.0), samples=2000, seed=1)
    assert rep.passed


def test_model_json_round_trip(golden):
    m = build_kernel(golden, 0.2)
    back = PoissonKernelModel.from_json(m.to_json())
    z = np.array([0.1 + 0.5j, 3 + 2j])
    assert np.array_equal(back.psi(z), m.psi(z))


def test_eval_psi_on_reflected_sheet(golden):
    m = build_kernel(golden, 0.0)
    below = SheetPoint(0.2 + 0.9j, 1)
    # Schwarz reflection in the slit line, where Im Psi equals the slit level k
    k = m.psi(0.0 + 1j, edge=+1).imag
    above = m.psi(0.2 + 1.1j)
    val = eval_psi(m, below)
    assert val.imag == pytest.approx(2 * k - above.imag, abs=1e-9)
