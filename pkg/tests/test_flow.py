import numpy as np
import pytest

from komatu_loewner.drivers import DriverSpec, dirac, sample, zero
from komatu_loewner.flow import (FlowTrajectory, KernelLimit, SolveOptions, advance, config_at,
                                 evolution_family_report, flow_map, map_evaluator,
                                 near_endpoint_step, solve_backward, solve_forward, solve_reversed,
                                 trace_point)
from komatu_loewner.geometry import SheetPoint, SlitConfig, sq_coordinate
from komatu_loewner.maps import hcap


@pytest.fixture(scope="module")
def golden_run():
    s = SlitConfig([1.0], [-1.0], [1.0])
    return solve_forward(s, dirac(0.0, T=0.3), [SheetPoint(2j), SheetPoint(0.5 + 0.5j)], 0.3)


def test_half_plane_closed_form():
    # without slits the forward flow is g_t(z) = sqrt(z^2 - 4t)
    empty = SlitConfig.empty()
    tr = solve_forward(empty, dirac(0.0), [SheetPoint(1j), SheetPoint(1 + 1j)], 1.0)
    z = np.array([1j, 1 + 1j])
    assert tr.tracked[-1] == pytest.approx(np.sqrt(z ** 2 - 4), abs=1e-10)
    tr = solve_reversed(empty, dirac(0.0), [SheetPoint(2j)], 0.5)
    assert tr.tracked[-1][0] == pytest.approx(np.sqrt(2) * 1j, abs=1e-9)


def test_reversed_absorption_on_real_axis():
    tr = solve_reversed(SlitConfig.empty(), dirac(0.0), [SheetPoint(0.1j)], 0.1)
    assert not tr.alive[-1][0]
    assert tr.death_times[0] == pytest.approx(0.0025, abs=1e-6)


def test_zero_driver_is_identity():
    s = SlitConfig([1.0], [-1.0], [1.0])
    tr = solve_forward(s, zero(), [SheetPoint(0.3 + 2j)], 0.5)
    assert tr.final_config == s
    assert tr.tracked[-1][0] == 0.3 + 2j


def test_symmetric_run_keeps_symmetry(golden_run):
    s = golden_run.final_config
    assert s.x_left[0] == pytest.approx(-s.x_right[0], abs=1e-12)
    assert golden_run.tracked[-1][0].real == pytest.approx(0.0, abs=1e-12)
    # slits rise under the forward flow
    assert s.y[0] > 1.0
    assert golden_run.halt_reason == "completed"


def test_half_plane_capacity_grows_linearly(golden_run):
    f = map_evaluator(golden_run, 0.0, 0.3)
    assert hcap(f) == pytest.approx(0.6, abs=1e-7)


def test_semigroup(golden_run):
    z = np.array([0.4 + 1.8j, -2 + 0.7j])
    direct = flow_map(golden_run, 0.0, 0.3, z)
    mid = flow_map(golden_run, 0.0, 0.1, z)
    two = flow_map(golden_run, 0.1, 0.3, mid)
    assert two == pytest.approx(direct, abs=1e-9)


def test_backward_round_trip(golden_run):
    z = 0.4 + 1.8j
    back = solve_backward(golden_run, z, 0.3)
    w = back.tracked[-1][0]
    assert flow_map(golden_run, 0.0, 0.3, [w])[0] == pytest.approx(z, abs=1e-8)


def test_config_at_and_advance(golden_run):
    mid = config_at(golden_run, 0.15)
    assert 1.0 < mid.y[0] < golden_run.final_config.y[0]
    s = SlitConfig([1.0], [-1.0], [1.0])
    part = solve_forward(s, dirac(0.0, T=0.3), [SheetPoint(2j)], 0.15)
    full = advance(part, 0.15)
    assert full.times[-1] == pytest.approx(0.3)
    assert full.tracked[-1][0] == pytest.approx(golden_run.tracked[-1][0], abs=1e-8)


def test_json_round_trip(golden_run):
    back = FlowTrajectory.from_dict(golden_run.to_dict())
    assert back.times == golden_run.times
    assert back.final_config == golden_run.final_config
    assert golden_run.to_csv().splitlines()[0] == "t,point,re,im,sheet,alive"
    assert golden_run.slits_csv().splitlines()[0] == "t,slit,y,x_left,x_right"


def test_evolution_family_report(golden_run):
    rep = evolution_family_report(golden_run, n_random=2, hcap_pairs=1)
    assert rep.passed


def test_trace_of_half_plane_flow():
    tr = solve_reversed(SlitConfig.empty(), dirac(0.0), [], 0.25)
    assert trace_point(tr, 0.25) == pytest.approx(1j, abs=1e-6)


def test_chart_and_plain_coordinates_agree():
    s = SlitConfig([1.0], [-1.0], [1.0])
    z = -1 + 1j + 0.05 * np.exp(1j * np.pi / 3)
    drv = dirac(0.5, T=0.05)
    chart = solve_forward(s, drv, [SheetPoint(z)], 0.05)
    assert chart.stats["chart_steps"] > 0
    plain = solve_forward(s, drv, [SheetPoint(z)], 0.05, SolveOptions(rho_guard=1e-6))
    assert plain.stats["chart_steps"] == 0
    assert chart.tracked[-1][0] == pytest.approx(plain.tracked[-1][0], abs=1e-8)


def test_near_endpoint_step():
    s = SlitConfig([1.0], [-1.0], [1.0])
    p = SheetPoint(-1 + 1j + 0.01 * np.exp(0.5j))
    s_new, p_new, w_new, dt = near_endpoint_step(s, dirac(0.5), 0, "left", p, 0.0, 1e-3)
    assert dt > 0
    assert w_new == pytest.approx(sq_coordinate(s_new, 0, "left", p_new), abs=1e-10)


def test_kernel_limit_is_reported():
    # a slit sinking straight onto the driving atom outgrows any fixed degree
    s = SlitConfig([0.05], [-0.5], [0.5])
    opts = SolveOptions(max_degree=32, y_floor=1e-4)
    tr = solve_reversed(s, dirac(0.0, T=0.2), [], 0.2, opts)
    assert tr.halt_reason.startswith("kernel_limit")
    with pytest.raises(KernelLimit):
        solve_reversed(s, dirac(0.0, T=0.2), [], 0.2, opts, halt_on_kernel_limit=False)


def test_dyson_driver_two_slits():
    s = SlitConfig([1.0, 2.0], [-1.0, 0.5], [0.5, 2.0])
    drv = sample(DriverSpec("dyson", T=0.1, n_steps=50, params={"n": 2, "seed": 1}))
    tr = solve_forward(s, drv, [SheetPoint(3j)], 0.1)
    assert tr.halt_reason == "completed"
    assert np.all(tr.final_config.y > s.y)
