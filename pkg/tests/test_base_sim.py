import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.base_sim import (
    OmniBaseGeometry,
    PiGains,
    _integrate,
    controls_from_bases,
    pi_track,
    simulate_execution,
    twist_from_wheel_speeds,
    wheel_speeds_from_twist,
)
from ccma.forward_solver import solve_fk
from ccma.ik_control import base_poses, ee_state, track_waypoints

GEOM = OmniBaseGeometry()


@pytest.fixture(scope="module")
def short_track():
    from conftest import assembled

    model, s0, u0 = assembled("ccma-4dof-reduced")
    X0 = ee_state(model, s0)
    rep = track_waypoints(model, s0, u0, [X0 + [0.02, 0, 0, 0, 0, 0], X0 + [0.02, 0.01, -0.01, 0.005, 0, 0]])
    assert rep.all_converged
    return model, s0, u0, rep


def test_zero_twist_gives_zero_wheel_speeds():
    assert not wheel_speeds_from_twist(GEOM, [0, 0, 0]).any()


def test_pure_rotation_spins_every_wheel_equally():
    omega = 1.3
    speeds = wheel_speeds_from_twist(GEOM, [0, 0, omega])
    np.testing.assert_allclose(speeds, GEOM.mount_radius * omega / GEOM.wheel_radius, rtol=1e-15)


def test_wheel_speeds_are_perpendicular_to_the_mount_direction():
    # a wheel at mount angle 0 rolls along body y
    speeds = wheel_speeds_from_twist(GEOM, [0.0, 0.2, 0.0])
    assert speeds[0] == pytest.approx(0.2 / GEOM.wheel_radius)


twist = st.lists(st.floats(-5, 5, allow_nan=False, allow_subnormal=False), min_size=3, max_size=3)
# scaling by a power of two is exact only while results stay clear of underflow
scalable = st.floats(-5, 5, allow_nan=False).filter(lambda v: v == 0.0 or abs(v) > 1e-280)
scalable_twist = st.lists(scalable, min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(twist)
def test_wheel_map_round_trip(tw):
    back = twist_from_wheel_speeds(GEOM, wheel_speeds_from_twist(GEOM, tw))
    np.testing.assert_allclose(back, tw, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(scalable_twist, st.integers(-8, 8), st.sampled_from([1.0, -1.0]))
def test_wheel_map_is_exactly_linear(tw, power, sign):
    a = sign * 2.0**power
    scaled = wheel_speeds_from_twist(GEOM, np.array(tw) * a)
    assert np.array_equal(scaled, a * wheel_speeds_from_twist(GEOM, tw))


@pytest.mark.parametrize(
    "kwargs",
    [dict(wheel_radius=0.0), dict(mount_radius=-0.1), dict(mount_angles=(0.0, 1.0, 1.0)), dict(mount_angles=(0.0, 1.0))],
)
def test_invalid_geometry_is_rejected(kwargs):
    with pytest.raises(ValueError):
        OmniBaseGeometry(**kwargs)


def test_negative_gains_are_rejected():
    with pytest.raises(ValueError):
        PiGains(kp=-1.0)


def test_pi_with_no_error_commands_nothing():
    tw, integral = pi_track([0.3, -0.2, 0.5], [0.3, -0.2, 0.5], PiGains(), 0.01)
    assert not tw.any() and not integral.any()


def test_proportional_only_twist_is_gain_times_body_error():
    gains = PiGains(kp=(2.0, 3.0, 4.0), ki=0.0)
    tw, _ = pi_track([0.0, 0.0, 0.0], [0.1, -0.2, 0.3], gains, 0.01)
    np.testing.assert_allclose(tw, [0.2, -0.6, 1.2], rtol=1e-15)
    # a base facing +y sees a world +x error as a body -y error
    tw, _ = pi_track([0.0, 0.0, math.pi / 2], [0.1, 0.0, math.pi / 2], gains, 0.01)
    np.testing.assert_allclose(tw, [0.0, -0.3, 0.0], atol=1e-15)


def test_integrator_is_clamped():
    gains = PiGains(kp=0.0, ki=1.0, integral_limit=0.05)
    _, integral = pi_track([0, 0, 0], [100.0, 0, 0], gains, 1.0)
    assert integral[0] == 0.05


def test_pi_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        pi_track([0, 0, 0], [0, 0, 0], PiGains(), 0.0)


def _python_loop(start, setpoint, gains, dt, steps, geometry=GEOM):
    # reference route: pi_track plus the wheel map, one base, plain Python
    pose = np.array(start, float)
    integral = np.zeros(3)
    trace = []
    for _ in range(steps):
        tw, integral = pi_track(pose, setpoint, gains, dt, integral)
        tw = twist_from_wheel_speeds(geometry, wheel_speeds_from_twist(geometry, tw))
        c, s = math.cos(pose[2]), math.sin(pose[2])
        pose = pose + dt * np.array([c * tw[0] - s * tw[1], s * tw[0] + c * tw[1], tw[2]])
        trace.append(pose.copy())
    return np.array(trace)


def _compiled(start, setpoint, gains, dt, steps, geometry=GEOM):
    M = geometry.matrix()
    poses = np.array([start], float)
    trace = np.empty((steps, 1, 3))
    wheels = np.empty((steps, 1, 3))
    _integrate(
        poses, np.zeros((1, 3)), np.array([setpoint], float), np.array(gains.kp), np.array(gains.ki),
        gains.integral_limit, M, np.linalg.inv(M), dt, np.zeros((steps + 1, 1, 2)), trace, wheels,
    )
    return trace[:, 0]


def test_step_setpoint_settles_within_two_seconds():
    trace = _python_loop([0, 0, 0], [0.1, 0, 0], PiGains(), 0.01, 200)
    assert np.linalg.norm(trace[-1, :2] - [0.1, 0]) < 1e-4


def test_compiled_integrator_matches_the_python_loop():
    gains = PiGains(kp=(8.0, 6.0, 5.0), ki=(20.0, 10.0, 5.0))
    start, setpoint = [0.2, -0.1, 0.4], [0.35, 0.05, -0.3]
    ref = _python_loop(start, setpoint, gains, 0.01, 300)
    fast = _compiled(start, setpoint, gains, 0.01, 300)
    np.testing.assert_allclose(fast, ref, atol=1e-12)


def test_controls_from_bases_inverts_the_heading_sign(reduced):
    model, s0, u0 = reduced
    bases = np.array([[0.1, 0.2, 0.3]] * model.n_m)
    u = controls_from_bases(model, bases, u0)
    assert u[0] == 0.1 and u[1] == 0.2 and u[2] == -0.3


def test_pinning_commanded_bases_reproduces_the_track(short_track):
    model, s0, u0, rep = short_track
    s = s0
    for row in rep.rows:
        sol = solve_fk(model, s, controls_from_bases(model, row.bases, u0))
        assert sol.assembled
        np.testing.assert_allclose(ee_state(model, sol.s_hat), row.achieved, atol=1e-8)
        s = sol.s_hat


def test_execution_without_noise_matches_the_plan(short_track):
    model, s0, u0, rep = short_track
    ex = simulate_execution(model, rep, s0, u0, settle_time=5.0)
    assert set(ex.status) == {"ok"}
    assert np.max(np.abs(ex.simulated_bases - ex.commanded_bases)) < 1e-8
    assert ex.position_rmse() < 1e-6


def test_zero_gains_leave_the_bases_in_place(short_track):
    model, s0, u0, rep = short_track
    ex = simulate_execution(model, rep, s0, u0, gains=PiGains(kp=0.0, ki=0.0))
    start = base_poses(model, s0)
    assert all(np.array_equal(b, start) for b in ex.simulated_bases)
    assert not ex.wheel_speeds.any()
    expected = ee_state(model, s0) - rep.targets()
    np.testing.assert_allclose(ex.ee_error[:, :4], expected[:, :4], atol=1e-9)


def test_noise_run_is_reproducible_from_its_seed(short_track):
    model, s0, u0, rep = short_track
    a = simulate_execution(model, rep, s0, u0, noise_sigma=0.005, seed=4)
    b = simulate_execution(model, rep, s0, u0, noise_sigma=0.005, seed=4)
    c = simulate_execution(model, rep, s0, u0, noise_sigma=0.005, seed=5)
    assert a.ee_simulated.tobytes() == b.ee_simulated.tobytes()
    assert a.base_trace.tobytes() == b.base_trace.tobytes()
    assert a.ee_simulated.tobytes() != c.ee_simulated.tobytes()


def test_report_shapes(short_track):
    model, s0, u0, rep = short_track
    ex = simulate_execution(model, rep, s0, u0, dt=0.02, settle_time=0.5)
    n = len(rep)
    assert ex.settle_steps == 25
    assert ex.base_trace.shape == (n * 25, model.n_m, 3)
    assert ex.wheel_speeds.shape == (n * 25, model.n_m, 3)
    assert ex.ee_simulated.shape == (n, 6)
    assert len(ex.status) == n
    np.testing.assert_allclose(ex.sample_times[-1], n * 0.5)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(settle_time=-1.0), dict(noise_sigma=-0.001)])
def test_invalid_simulation_arguments(short_track, kwargs):
    model, s0, u0, rep = short_track
    with pytest.raises(ValueError):
        simulate_execution(model, rep, s0, u0, **kwargs)
