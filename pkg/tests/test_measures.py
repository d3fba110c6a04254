import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from komatu_loewner.measures import BoundaryMeasure, MeasureError


def test_validation():
    with pytest.raises(MeasureError):
        BoundaryMeasure.atoms([0.0], [-1.0])
    with pytest.raises(MeasureError):
        BoundaryMeasure.from_density([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(MeasureError):
        BoundaryMeasure.atoms([0.0, 1.0], [1.0])


def test_mass_and_support():
    mu = BoundaryMeasure.atoms([-2.0, 1.0], [0.5, 1.5]) + \
        BoundaryMeasure.from_density([0.0, 1.0, 3.0], [0.0, 2.0, 0.0])
    assert mu.total_mass == pytest.approx(2.0 + 3.0)
    assert mu.support_bound() == pytest.approx(3.0)
    assert mu.mass_of_interval(-3, 0.5) == pytest.approx(0.5 + 0.25)
    assert BoundaryMeasure.zero().is_zero


def test_cauchy_transform_of_uniform_density_is_exact():
    mu = BoundaryMeasure.from_density([-1.0, 1.0], [0.5, 0.5])
    z = np.array([0.3 + 0.7j, 2 + 0.1j, -4 + 3j])
    exact = 0.5 * np.log((z + 1) / (z - 1))  # int_{-1}^{1} 0.5/(z - xi) dxi
    assert mu.cauchy_transform(z) == pytest.approx(exact, rel=1e-13)


def test_json_round_trip():
    mu = BoundaryMeasure.atoms([0.1, 1 / 3], [np.pi, 1e-17]) + \
        BoundaryMeasure.from_density([0.0, 0.5], [2 / 3, 1.0])
    back = BoundaryMeasure.from_json(mu.to_json())
    for name in ("atom_locations", "atom_masses", "grid", "density"):
        assert np.array_equal(getattr(back, name), getattr(mu, name))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4),
       st.lists(st.floats(0.01, 2), min_size=4, max_size=4),
       st.floats(-3, 3))
def test_shift_and_scale(locs, masses, t):
    mu = BoundaryMeasure.atoms(locs, masses[:len(locs)])
    assert mu.shifted(t).total_mass == pytest.approx(mu.total_mass)
    assert mu.scaled(2.0).total_mass == pytest.approx(2 * mu.total_mass)
    z = 0.5 + 1j
    assert mu.shifted(t).cauchy_transform(z + t) == pytest.approx(mu.cauchy_transform(z))
