import numpy as np
import pytest

from komatu_loewner.drivers import (DriverError, DriverSpec, DrivingProcess, dirac, sample,
                                    support_bound, zero)


def test_dirac_driver():
    d = dirac([[0.0, 0.0], [1.0, 2.0]], T=1.0, n_steps=10)
    assert d.atom_positions(0.25) == pytest.approx([0.5])
    assert d.mass(0.3) == pytest.approx(1.0)
    assert support_bound(d) == pytest.approx(2.0)
    assert zero().is_zero()


def test_multi_dirac_weights_validated():
    with pytest.raises(DriverError):
        sample(DriverSpec("multi_dirac", params={"paths": [0.0, 1.0], "weights": [0.7, 0.7]}))
    d = sample(DriverSpec("multi_dirac", params={"paths": [0.0, 1.0], "weights": [0.25, 0.75]}))
    assert d.measure_at(0.5).atom_masses == pytest.approx([0.25, 0.75])


def test_declared_support_is_enforced():
    with pytest.raises(DriverError):
        sample(DriverSpec("dirac", params={"path": 3.0}, support=2.0))


def test_unknown_kind():
    with pytest.raises(DriverError):
        DriverSpec("levy")


def test_brownian_is_reproducible():
    spec = DriverSpec("brownian", T=1.0, n_steps=500, params={"kappa": 2.0, "seed": 7})
    a, b = sample(spec), sample(spec)
    assert np.array_equal(a.atoms, b.atoms)
    c = sample(DriverSpec("brownian", T=1.0, n_steps=500, params={"kappa": 2.0, "seed": 8}))
    assert not np.array_equal(a.atoms, c.atoms)


def test_brownian_variance():
    ends = [sample(DriverSpec("brownian", T=1.0, n_steps=4,
                              params={"kappa": 2.0, "seed": s})).atoms[0, -1] for s in range(2000)]
    assert np.var(ends) == pytest.approx(2.0, rel=0.1)


def test_dyson_paths_stay_ordered():
    d = sample(DriverSpec("dyson", T=0.5, n_steps=200, params={"n": 4, "seed": 3, "spread": 1.0}))
    assert np.all(np.diff(d.atoms, axis=0) > 0)
    assert d.mass(0.2) == pytest.approx(1.0)


def test_density_driver_mass():
    g = np.linspace(-1, 1, 21)
    d = sample(DriverSpec("density", params={"grid": g.tolist(), "density": (0.5 * np.ones(21)).tolist()}))
    assert d.mass(0.4) == pytest.approx(1.0)


def test_time_reversal():
    d = dirac(lambda t: t ** 2, T=1.0, n_steps=50)
    r = d.time_reversed(0.8)
    for t in (0.0, 0.3, 0.8):
        assert r.atom_positions(t)[0] == pytest.approx(d.atom_positions(0.8 - t)[0], abs=1e-3)


def test_round_trip():
    spec = DriverSpec("dyson", T=0.2, n_steps=20, params={"n": 2, "seed": 1})
    assert DriverSpec.from_json(spec.to_json()) == spec
    d = sample(spec)
    back = DrivingProcess.from_dict(d.to_dict())
    assert np.array_equal(back.atoms, d.atoms)
    with pytest.raises(DriverError):
        DriverSpec("dirac", params={"path": lambda t: t}).to_dict()
