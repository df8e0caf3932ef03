"""Kinematic execution layer: PI-tracked omni-wheel bases.

Each base follows its commanded planar pose (x, y, yaw) under a PI law
whose output twist is routed through the swedish-90 wheel map and back,
then integrated with explicit Euler. Measured poses are perfect; an
optional Gaussian disturbance is added to every base position each step.
The end effector is never fed back. Its pose is recovered by a forward
solve with the motors pinned to the simulated base poses, which is how
base tracking error turns into end-effector error. That solve starts from
the planned configuration of the same track row, so a disturbance near a
singular pose cannot carry later samples onto another assembly branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .forward_solver import FkConfig, SolverBreakdown, solve_fk
from .ik_control import base_poses, ee_state


@dataclass(frozen=True)
class OmniBaseGeometry:
    wheel_radius: float = 0.05
    mount_angles: tuple[float, float, float] = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    mount_radius: float = 0.15

    def __post_init__(self):
        if self.wheel_radius <= 0 or self.mount_radius <= 0:
            raise ValueError("wheel radius and mount radius must be positive")
        if len(self.mount_angles) != 3:
            raise ValueError("exactly three wheel mount angles are required")
        a = np.mod(np.asarray(self.mount_angles, dtype=float), 2.0 * math.pi)
        gaps = np.abs(a[:, None] - a[None, :])
        gaps = np.minimum(gaps, 2.0 * math.pi - gaps)
        if np.min(gaps[np.triu_indices(3, 1)]) < 1e-9:
            raise ValueError("wheel mount angles must be distinct")

    def matrix(self) -> np.ndarray:
        """Wheel speeds = matrix @ (vx, vy, omega) in the base frame."""
        d = np.asarray(self.mount_angles, dtype=float)
        M = np.column_stack([-np.sin(d), np.cos(d), np.full(3, self.mount_radius)])
        return M / self.wheel_radius


def wheel_speeds_from_twist(geometry: OmniBaseGeometry, twist) -> np.ndarray:
    return geometry.matrix() @ np.asarray(twist, dtype=float)


def twist_from_wheel_speeds(geometry: OmniBaseGeometry, speeds) -> np.ndarray:
    return np.linalg.lstsq(geometry.matrix(), np.asarray(speeds, dtype=float), rcond=None)[0]


@dataclass(frozen=True)
class PiGains:
    """Per-coordinate (x, y, yaw) gains. The defaults put a double pole at -5 rad/s."""

    kp: tuple[float, float, float] = (10.0, 10.0, 10.0)
    ki: tuple[float, float, float] = (25.0, 25.0, 25.0)
    integral_limit: float = 1.0

    def __post_init__(self):
        kp = tuple(float(v) for v in np.broadcast_to(self.kp, 3))
        ki = tuple(float(v) for v in np.broadcast_to(self.ki, 3))
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "ki", ki)
        if min(kp) < 0 or min(ki) < 0:
            raise ValueError("PI gains must be non-negative")
        if self.integral_limit <= 0:
            raise ValueError("integral_limit must be positive")


def pi_track(current, setpoint, gains: PiGains, dt: float, integral=None):
    """One PI update. Returns (body twist, new integral state).

    The world-frame position error is rotated into the base frame; the
    integrator accumulates that body-frame error and is clamped to
    +-integral_limit per coordinate.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    current = np.asarray(current, dtype=float)
    setpoint = np.asarray(setpoint, dtype=float)
    integral = np.zeros(3) if integral is None else np.asarray(integral, dtype=float)
    err = _body_error(current, setpoint)
    integral = np.clip(integral + err * dt, -gains.integral_limit, gains.integral_limit)
    twist = np.asarray(gains.kp) * err + np.asarray(gains.ki) * integral
    return twist, integral


def _body_error(current, setpoint):
    ex = setpoint[0] - current[0]
    ey = setpoint[1] - current[1]
    c, s = math.cos(current[2]), math.sin(current[2])
    return np.array([c * ex + s * ey, -s * ex + c * ey, setpoint[2] - current[2]])


@njit(cache=True)
def _integrate(poses, integral, setpoint, kp, ki, limit, M, Minv, dt, noise, trace, wheels):
    # poses, integral: (n_m, 3) integrated state, updated in place.
    # noise: (n_steps + 1, n_m, 2) position offsets; the realized (and
    # measured) pose before step k is the integrated pose plus noise[k].
    n_steps = noise.shape[0] - 1
    n_m = poses.shape[0]
    err = np.empty(3)
    tw = np.empty(3)
    for k in range(n_steps):
        for b in range(n_m):
            yaw = poses[b, 2]
            c = math.cos(yaw)
            s = math.sin(yaw)
            ex = setpoint[b, 0] - (poses[b, 0] + noise[k, b, 0])
            ey = setpoint[b, 1] - (poses[b, 1] + noise[k, b, 1])
            err[0] = c * ex + s * ey
            err[1] = -s * ex + c * ey
            err[2] = setpoint[b, 2] - yaw
            for i in range(3):
                v = integral[b, i] + err[i] * dt
                integral[b, i] = min(max(v, -limit), limit)
                tw[i] = kp[i] * err[i] + ki[i] * integral[b, i]
            for w in range(3):
                wheels[k, b, w] = M[w, 0] * tw[0] + M[w, 1] * tw[1] + M[w, 2] * tw[2]
            vx = Minv[0, 0] * wheels[k, b, 0] + Minv[0, 1] * wheels[k, b, 1] + Minv[0, 2] * wheels[k, b, 2]
            vy = Minv[1, 0] * wheels[k, b, 0] + Minv[1, 1] * wheels[k, b, 1] + Minv[1, 2] * wheels[k, b, 2]
            om = Minv[2, 0] * wheels[k, b, 0] + Minv[2, 1] * wheels[k, b, 1] + Minv[2, 2] * wheels[k, b, 2]
            poses[b, 0] += dt * (c * vx - s * vy)
            poses[b, 1] += dt * (s * vx + c * vy)
            poses[b, 2] += dt * om
            trace[k, b, 0] = poses[b, 0] + noise[k + 1, b, 0]
            trace[k, b, 1] = poses[b, 1] + noise[k + 1, b, 1]
            trace[k, b, 2] = poses[b, 2]


@dataclass
class ExecutionReport:
    dt: float
    settle_steps: int
    sample_times: np.ndarray
    commanded_bases: np.ndarray  # (n_samples, n_m, 3)
    simulated_bases: np.ndarray  # (n_samples, n_m, 3) at sample times
    base_trace: np.ndarray  # (n_steps, n_m, 3)
    wheel_speeds: np.ndarray  # (n_steps, n_m, 3)
    ee_commanded: np.ndarray  # (n_samples, 6)
    ee_simulated: np.ndarray  # (n_samples, 6), NaN where the solve failed
    status: list = field(default_factory=list)
    mask: tuple = (True,) * 6

    @property
    def ee_error(self) -> np.ndarray:
        return self.ee_simulated - self.ee_commanded

    def rmse(self) -> np.ndarray:
        """Per-coordinate end-effector RMSE over successful samples (NaN if unmasked)."""
        ok = np.all(np.isfinite(self.ee_simulated), axis=1)
        if not ok.any():
            return np.full(6, np.nan)
        out = np.sqrt(np.mean(self.ee_error[ok] ** 2, axis=0))
        return np.where(np.array(self.mask), out, np.nan)

    def position_rmse(self) -> float:
        """RMSE of the end-effector position error norm, in metres."""
        ok = np.all(np.isfinite(self.ee_simulated), axis=1)
        if not ok.any():
            return float("nan")
        return float(np.sqrt(np.mean(np.sum(self.ee_error[ok, :3] ** 2, axis=1))))

    def base_rmse(self) -> float:
        d = self.simulated_bases[..., :2] - self.commanded_bases[..., :2]
        return float(np.sqrt(np.mean(np.sum(d**2, axis=-1))))


def controls_from_bases(model, bases, u_template) -> np.ndarray:
    """Control vector whose motor constraints pin each base at (x, y, yaw).

    The motor_z convention makes the base yaw equal to -theta.
    """
    u = np.array(u_template, dtype=float)
    bases = np.asarray(bases, dtype=float)
    for k in range(model.n_m):
        u[3 * k] = bases[k, 0]
        u[3 * k + 1] = bases[k, 1]
        u[3 * k + 2] = -bases[k, 2]
    return u


def simulate_execution(
    model,
    track,
    s_init,
    u_init,
    geometry: OmniBaseGeometry | None = None,
    gains: PiGains | None = None,
    dt: float = 0.01,
    settle_time: float = 1.5,
    noise_sigma: float = 0.0,
    seed: int | None = None,
    fk: FkConfig | None = None,
) -> ExecutionReport:
    """Drive the bases through every row of ``track`` and sample the end effector.

    Each track row's base poses are held as the setpoint for ``settle_time``
    seconds; the end effector is sampled by a forward solve at the end of
    every window. ``(s_init, u_init)`` is the feasible start the track
    began from; bases start exactly there.
    """
    if dt <= 0 or settle_time <= 0:
        raise ValueError("dt and settle_time must be positive")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    geometry = geometry or OmniBaseGeometry()
    gains = gains or PiGains()
    fk = fk or FkConfig()
    rng = np.random.default_rng(seed)
    M = geometry.matrix()
    Minv = np.linalg.inv(M)
    kp = np.asarray(gains.kp, dtype=float)
    ki = np.asarray(gains.ki, dtype=float)

    s_plan = np.array(s_init, dtype=float)
    poses = base_poses(model, s_plan).copy()
    integral = np.zeros_like(poses)
    settle = max(1, int(round(settle_time / dt)))
    rows = list(track.rows)
    n_m = model.n_m
    n = len(rows)
    trace = np.empty((n * settle, n_m, 3))
    wheels = np.empty((n * settle, n_m, 3))
    sim_bases = np.empty((n, n_m, 3))
    ee_sim = np.full((n, 6), np.nan)
    ee_cmd = np.empty((n, 6))
    cmd_bases = np.empty((n, n_m, 3))
    status = []
    # i.i.d. position offsets; drawn up front so a seed fixes the whole run
    offsets = np.zeros((n * settle + 1, n_m, 2))
    if noise_sigma > 0:
        offsets[1:] = rng.normal(0.0, noise_sigma, size=(n * settle, n_m, 2))
    for i, row in enumerate(rows):
        setpoint = np.ascontiguousarray(row.bases, dtype=float)
        sl = slice(i * settle, (i + 1) * settle)
        window = offsets[i * settle : (i + 1) * settle + 1]
        _integrate(poses, integral, setpoint, kp, ki, gains.integral_limit, M, Minv, dt, window, trace[sl], wheels[sl])
        realized = poses.copy()
        realized[:, :2] += window[-1]
        sim_bases[i] = realized
        cmd_bases[i] = setpoint
        ee_cmd[i] = row.target
        # the planned configuration anchors the perturbed solve to the
        # assembly branch the track was computed on
        try:
            plan = solve_fk(model, s_plan, np.asarray(row.u, dtype=float), fk)
            if plan.converged and plan.assembled:
                s_plan = plan.s_hat
            rep = solve_fk(model, s_plan, controls_from_bases(model, realized, u_init), fk)
        except SolverBreakdown:
            status.append("breakdown")
            continue
        if rep.converged:
            ee_sim[i] = ee_state(model, rep.s_hat)
            status.append("ok" if rep.assembled else "not_assembled")
        else:
            status.append("not_converged")
    return ExecutionReport(
        dt=dt,
        settle_steps=settle,
        sample_times=dt * settle * np.arange(1, n + 1),
        commanded_bases=cmd_bases,
        simulated_bases=sim_bases,
        base_trace=trace,
        wheel_speeds=wheels,
        ee_commanded=ee_cmd,
        ee_simulated=ee_sim,
        status=status,
        mask=tuple(track.mask),
    )
