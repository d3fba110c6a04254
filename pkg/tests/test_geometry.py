import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from komatu_loewner.geometry import (BASE, ChartError, GeometryError, SheetPoint, SlitConfig, eta,
                                     l_half_gap, mirror, project, r_out, reflect, sheet_after_move,
                                     slit_distance, sq_coordinate, sq_inverse)


def test_rejects_degenerate_configs():
    with pytest.raises(GeometryError):
        SlitConfig([1.0], [1.0], [1.0])
    with pytest.raises(GeometryError):
        SlitConfig([0.0], [-1.0], [1.0])
    with pytest.raises(GeometryError):
        SlitConfig([1.0, 1.0], [-1.0, 0.5], [1.0, 2.0])


def test_slit_distance_examples(golden):
    assert slit_distance(golden, golden) == 0
    assert slit_distance(golden, golden.translated(1.0)) == pytest.approx(2.0)
    raised = SlitConfig([1.5], [-1.0], [1.0])
    assert slit_distance(golden, raised) == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        slit_distance(golden, SlitConfig.empty())


def test_contains(golden):
    assert golden.contains(2j)
    assert not golden.contains(1j)
    assert not golden.contains(-1j)
    assert not golden.contains(3.0)


def test_scalars():
    s = SlitConfig([1.0], [-1.0], [1.0])
    assert (eta(s), r_out(s), l_half_gap(s)) == pytest.approx((1.0, np.sqrt(2), 0.5))
    s = SlitConfig([1.0, 3.0], [0.0, 0.0], [1.0, 1.0])
    assert l_half_gap(s) == pytest.approx(0.5)
    s = SlitConfig([0.2], [-5.0], [5.0])
    assert eta(s) == pytest.approx(0.2)
    assert r_out(s) == pytest.approx(np.sqrt(25.04))


def test_project_and_reflect(golden):
    assert project(SheetPoint(2j)) == 2j
    p = SheetPoint(0.5 + 0.5j, 1)
    assert reflect(p, golden) == pytest.approx(0.5 + 1.5j)
    on = SheetPoint(0.3 + 1j, 1)
    assert reflect(on, golden) == pytest.approx(0.3 + 1j)
    with pytest.raises(GeometryError):
        reflect(SheetPoint(0.5 + 0.5j, 2), golden)


def test_json_round_trip_is_exact():
    s = SlitConfig([0.1 + 1e-17, 2 / 3], [-np.pi, 1 / 7], [0.1, 0.2 + 1e-16])
    back = SlitConfig.from_json(s.to_json())
    assert back == s
    assert json.loads(s.to_json()) == {"y": list(s.y), "x_left": list(s.x_left),
                                       "x_right": list(s.x_right)}


def test_sq_coordinate_branches(golden):
    eps = 1e-3
    zl = complex(golden.z_left[0])
    assert sq_coordinate(golden, 0, "left", SheetPoint(zl)) == 0
    up = SheetPoint(zl + eps, BASE, +1)
    low = SheetPoint(zl + eps, BASE, -1)
    assert sq_coordinate(golden, 0, "left", up) == pytest.approx(np.sqrt(eps))
    assert sq_coordinate(golden, 0, "left", low) == pytest.approx(-np.sqrt(eps))
    # reflected sheet just below the slit continues the upper edge
    refl = SheetPoint(zl + eps - 1e-12j, 1)
    assert sq_coordinate(golden, 0, "left", refl) == pytest.approx(np.sqrt(eps), abs=1e-8)
    with pytest.raises(ChartError):
        sq_coordinate(golden, 0, "left", SheetPoint(zl + 0.6j))


def test_sq_inverse_round_trip(golden, rng):
    for end in ("left", "right"):
        for _ in range(200):
            w = 0.6 * np.sqrt(0.5) * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            p = sq_inverse(golden, 0, end, w)
            assert sq_coordinate(golden, 0, end, p) == pytest.approx(w, abs=1e-12)


def test_sq_coordinate_is_injective(golden):
    zl = complex(golden.z_left[0])
    r = np.linspace(0.05, 0.45, 9)
    th = np.linspace(0.1, 2 * np.pi - 0.1, 23)
    pts = [SheetPoint(zl + a * np.exp(1j * t)) for a in r for t in th]
    pts += [SheetPoint(zl + a * np.exp(1j * t), 1) for a in r for t in th]
    w = np.array([sq_coordinate(golden, 0, "left", p) for p in pts])
    d = np.abs(w[:, None] - w[None, :]) + np.eye(w.size)
    assert d.min() > 1e-6
    assert np.abs(w).max() < np.sqrt(l_half_gap(golden))


def test_sheet_toggles_when_crossing_slit(golden):
    p = sheet_after_move(golden, SheetPoint(0.2 + 1.5j), 0.2 + 0.5j)
    assert p.sheet == 1
    back = sheet_after_move(golden, p, 0.2 + 1.5j)
    assert back.sheet == BASE
    # passing beside the slit does not toggle
    assert sheet_after_move(golden, SheetPoint(1.5 + 1.5j), 1.5 + 0.5j).sheet == BASE


configs = st.integers(1, 3).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.1, 5), min_size=n, max_size=n),
    st.lists(st.floats(-5, 5), min_size=n, max_size=n),
    st.lists(st.floats(0.1, 3), min_size=n, max_size=n)))


def _build(t):
    y, x, w = map(np.asarray, t)
    # distinct heights avoid the overlap rule
    y = y + 1e-3 * np.arange(y.size)
    return SlitConfig(y, x, x + w)


@settings(max_examples=60, deadline=None)
@given(configs, configs, configs)
def test_slit_distance_is_a_metric(a, b, c):
    n = min(len(a[0]), len(b[0]), len(c[0]))
    a, b, c = [_build(tuple(v[:n] for v in t)) for t in (a, b, c)]
    assert slit_distance(a, b) == pytest.approx(slit_distance(b, a))
    assert slit_distance(a, c) <= slit_distance(a, b) + slit_distance(b, c) + 1e-12
    assert slit_distance(a, a) == 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 4))
def test_mirror_is_an_involution(x, y, h):
    z = complex(x, y)
    assert mirror(mirror(z, h), h) == pytest.approx(z)
