import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from stla import (
    IntegrationBlowup,
    Kind,
    SwitchSchedule,
    averaged_endpoint,
    catalog_lookup,
    certificate_schedule,
    classify,
    integrate,
    integrate_endpoint,
    one_switch_endpoint,
    three_switch_bracket_endpoint,
    write_trajectory_csv,
)


def test_constant_field_exact(make_models):
    system, _ = make_models(("x", "y"), [["0"], ["1"]], "y")
    schedule = SwitchSchedule([(np.array([1.0]), 0.7)])
    end = integrate_endpoint(system, schedule, [2.0, -1.0], 10)
    assert_allclose(end, [2.0, -0.3], atol=1e-15)


def test_rotation_closed_form():
    cfg = catalog_lookup("rotation")
    t = 0.1
    schedule = SwitchSchedule([(np.array([1.0]), t)])
    end = integrate_endpoint(cfg.system, schedule, [0.0, 1.0], 100)
    assert_allclose(end, [-math.sin(t), math.cos(t)], atol=1e-10)


def test_heisenberg_axis_path_exact():
    cfg = catalog_lookup("heisenberg")
    schedule = SwitchSchedule([(np.array([1.0, 0.0]), 1.0)])
    end = integrate_endpoint(cfg.system, schedule, [0.0, 0.0, 0.0], 100)
    assert_allclose(end, [1.0, 0.0, 0.0], atol=1e-12)


def test_record_grid_and_initial_state():
    cfg = catalog_lookup("heisenberg")
    schedule = SwitchSchedule([(np.array([1.0, 0.0]), 0.5), (np.array([0.0, 1.0]), 0.5)])
    record = integrate(cfg.system, schedule, [0.1, 0.2, 0.3], 50, target=cfg.target)
    assert record.times.shape == (101,)
    assert np.all(np.diff(record.times) > 0)
    assert_allclose(record.states[0], [0.1, 0.2, 0.3])
    assert record.u_values.shape == (101,)


def test_one_switch_same_control_matches_single_segment():
    cfg = catalog_lookup("dubins")
    a = np.array([0.6, 0.8])
    t = 0.3
    via_switch = one_switch_endpoint(cfg.system, a, a, cfg.point, t, 100)
    single = integrate_endpoint(cfg.system, SwitchSchedule([(a, 2 * t)]), cfg.point, 200)
    assert_allclose(via_switch, single, atol=1e-12)


@pytest.mark.parametrize("t", [0.1, 0.02])
def test_one_switch_heisenberg_bracket_deflection(t):
    cfg = catalog_lookup("heisenberg")
    end = one_switch_endpoint(
        cfg.system, np.array([1.0, 0.0]), np.array([0.0, 1.0]), [0.0, 0.0, 0.0], t, 100
    )
    assert_allclose(end, [t, t, -t * t], atol=1e-13)


def test_one_switch_rotation_closed_form():
    cfg = catalog_lookup("rotation")
    t = 0.05
    end = one_switch_endpoint(cfg.system, [1.0], [1.0], [0.0, 1.0], t, 100)
    assert_allclose(end, [-math.sin(2 * t), math.cos(2 * t)], atol=1e-10)


def test_averaged_opposite_controls_stay_put():
    cfg = catalog_lookup("dubins")
    a = np.array([0.5, -0.5])
    end = averaged_endpoint(cfg.system, a, -a, cfg.point, 0.4, 50)
    assert_allclose(end, cfg.point, atol=1e-15)


def test_averaged_heisenberg_preserves_z_from_origin():
    cfg = catalog_lookup("heisenberg")
    for t in (0.1, 0.4):
        end = averaged_endpoint(
            cfg.system, np.array([1.0, 0.0]), np.array([0.0, 1.0]), [0.0, 0.0, 0.0], t, 100
        )
        assert abs(end[2]) <= 1e-14


def test_three_switch_commuting_fields_return(make_models):
    system, _ = make_models(("x", "y"), [["1", "0"], ["0", "1"]], "x")
    end = three_switch_bracket_endpoint(system, 1, 2, [0.3, -0.4], 0.2, 50)
    assert_allclose(end, [0.3, -0.4], atol=1e-13)


def test_three_switch_heisenberg_bracket_value():
    cfg = catalog_lookup("heisenberg")
    t = 0.01
    end = three_switch_bracket_endpoint(cfg.system, 1, 2, [0.0, 0.0, 0.0], t, 100)
    assert_allclose(end, [0.0, 0.0, -2.0e-4], atol=1e-5)
    assert end[2] == pytest.approx(-2.0 * t * t, abs=1e-12)


def test_rk4_self_convergence_order():
    cfg = catalog_lookup("rotation")
    exact = np.array([-math.sin(1.0), math.cos(1.0)])

    def error(steps):
        schedule = SwitchSchedule([(np.array([1.0]), 1.0)])
        end = integrate_endpoint(cfg.system, schedule, [0.0, 1.0], steps)
        return np.linalg.norm(end - exact)

    ratio = error(10) / error(20)
    assert 12.0 < ratio < 20.0  # fourth order: halving h cuts error ~16x


def test_time_reversal_returns_to_start():
    cfg = catalog_lookup("heisenberg")
    a = np.array([0.3, 0.4])
    b = np.array([-0.5, 0.2])
    t = 0.2
    x0 = [0.1, -0.2, 0.3]
    forward = SwitchSchedule([(a, t), (b, t)])
    mid = integrate_endpoint(cfg.system, forward, x0, 200)
    back = SwitchSchedule([(-b, t), (-a, t)])
    end = integrate_endpoint(cfg.system, back, mid, 200)
    assert_allclose(end, x0, atol=1e-12)


def test_blowup_reports_time(make_models):
    system, _ = make_models(("x",), [["x*x"]], "x")
    schedule = SwitchSchedule([(np.array([1.0]), 1.0)])
    with pytest.raises(IntegrationBlowup) as err:
        integrate(system, schedule, [2.0], 200)
    assert 0.0 < err.value.time <= 1.0  # solution escapes at t = 0.5


def test_schedule_validation():
    with pytest.raises(ValueError, match="positive"):
        SwitchSchedule([(np.array([1.0]), 0.0)])
    with pytest.raises(ValueError, match="unit ball"):
        SwitchSchedule([(np.array([2.0]), 1.0)])


def test_certificate_schedule_orders_legs(oracle):
    cfg = catalog_lookup("heisenberg")
    cert = classify(cfg.system, cfg.target, oracle, [0.0, 0.0, 1.0])
    assert cert.kind == Kind.SECOND_ORDER
    schedule = certificate_schedule(cert, 0.25)
    assert len(schedule.segments) == 2
    assert_allclose(schedule.segments[0][0], cert.a2)
    assert_allclose(schedule.segments[1][0], cert.a1)


def test_trajectory_csv_format():
    cfg = catalog_lookup("rotation")
    schedule = SwitchSchedule([(np.array([1.0]), 0.2)])
    record = integrate(cfg.system, schedule, [0.0, 1.0], 4, target=cfg.target)
    buf = io.StringIO()
    write_trajectory_csv(record, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x1,x2,u"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[2]) == 1.0
