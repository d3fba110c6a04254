import numpy as np
import pytest

from komatu_loewner.geometry import SheetPoint, SlitConfig
from komatu_loewner.maps import (IntegralRepMap, angular_residue, apply_integral_rep, hcap,
                                 recover_measure, stieltjes_inversion)
from komatu_loewner.measures import BoundaryMeasure


def test_half_plane_map_is_explicit():
    mu = BoundaryMeasure.dirac(0.5, 0.3)
    f = IntegralRepMap(SlitConfig.empty(), mu)
    z = np.array([1 + 1j, -2 + 0.5j])
    assert f(z) == pytest.approx(z - 0.3 / (z - 0.5), abs=1e-14)


def test_residue_equals_total_mass(golden):
    mu = BoundaryMeasure.atoms([-0.5, 0.7], [0.2, 0.5])
    est = angular_residue(IntegralRepMap(golden, mu))
    assert est.value == pytest.approx(0.7, abs=1e-6)
    assert est.ray_spread < 1e-3
    assert hcap(IntegralRepMap(golden, mu)) == pytest.approx(0.7, abs=1e-6)


def test_image_of_slit_is_horizontal(golden):
    f = IntegralRepMap(golden, BoundaryMeasure.dirac(0.0, 0.5))
    x = np.linspace(-0.98, 0.98, 21)
    for edge in (+1, -1):
        assert np.ptp(f(x + 1j, edge=edge).imag) < 1e-9


def test_apply_integral_rep_uses_cache(golden):
    mu = BoundaryMeasure.dirac(0.1)
    cache = {}
    a = apply_integral_rep(golden, mu, 0.3 + 2j, cache)
    b = apply_integral_rep(golden, mu, SheetPoint(0.3 + 2j), cache)
    assert len(cache) == 1 and a == b


def test_recover_measure_from_density(golden):
    grid = np.linspace(-2, 2, 81)
    mu = BoundaryMeasure.from_density(grid, np.exp(-grid ** 2) / np.sqrt(np.pi))
    f = IntegralRepMap(golden, mu)
    xs = np.linspace(-1.5, 1.5, 13)
    rec, diag = recover_measure(f, golden, xs, return_diagnostics=True)
    assert np.abs(rec.density - mu.density_at(xs)).max() < 2e-3
    assert diag.converged.mean() > 0.8


def test_stieltjes_inversion_counts_atoms(golden):
    mu = BoundaryMeasure.atoms([0.0, 2.0], [0.4, 0.6])
    assert stieltjes_inversion(golden, mu, -1.0, 1.0) == pytest.approx(0.4, abs=1e-3)
    # an atom on the endpoint counts with half its mass
    assert stieltjes_inversion(golden, mu, 1.0, 2.0) == pytest.approx(0.3, abs=1e-3)
