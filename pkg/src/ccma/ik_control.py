"""Kinematic control: find base commands u that place the end effector.

The objective over the free controls is

    O(u) = 0.5 |mask * (X_EE(s_hat(u)) - X_target)|^2 + lam * E(s_hat(u), u)

where s_hat(u) is the forward solution. Its gradient uses the implicit
sensitivity ds/du = -H^-1 dG/du, so each evaluation costs one forward
solve plus one factorization. The outer loop is BFGS on the inverse
Hessian with Armijo backtracking; every trial point re-runs the forward
solve, warm-started from the first-order prediction s + ds/du * du.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .forward_solver import (
    FkConfig,
    SingularSensitivity,
    SolverBreakdown,
    energy_derivatives,
    solve_fk,
    state_sensitivity,
)


@dataclass(frozen=True)
class IkConfig:
    lam: float = 0.1
    grad_tol: float = 1e-8
    max_outer_iters: int = 200
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 30
    trans_step: float = 0.010
    rot_step: float = 0.005
    # skip the BFGS update when y.s <= curvature_eps * |y| |s|
    curvature_eps: float = 1e-10
    # length cap (in control units) of the very first trial step
    first_step: float = 0.05
    # seed of the inverse-Hessian approximation: "gauss-newton" inverts the
    # task Gauss-Newton matrix at the start point, "identity" uses a scaled
    # identity
    hessian_seed: str = "gauss-newton"
    subdivide: bool = True
    # Newton iteration cap for line-search trial solves; a warm-started
    # trial that needs more is rejected and the step shrunk
    trial_fk_iters: int = 25
    fk: FkConfig = field(default_factory=FkConfig)

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie strictly between 0 and 1")
        if self.trans_step <= 0 or self.rot_step <= 0:
            raise ValueError("step limits must be positive")
        if self.hessian_seed not in ("gauss-newton", "identity"):
            raise ValueError("hessian_seed must be 'gauss-newton' or 'identity'")
        if self.grad_tol <= 0 or self.max_outer_iters < 1:
            raise ValueError("grad_tol must be positive and max_outer_iters >= 1")


def ee_state(model, s) -> np.ndarray:
    """End-effector pose (x, y, z, gamma, beta, alpha) read from the state."""
    e = model.ee_index
    b = np.asarray(s, dtype=float)[6 * e : 6 * e + 6]
    return np.concatenate([b[3:], b[:3]])


def ee_rows(model) -> np.ndarray:
    """State indices of (x, y, z, gamma, beta, alpha) of the end effector."""
    e = model.ee_index
    return np.array([6 * e + 3, 6 * e + 4, 6 * e + 5, 6 * e, 6 * e + 1, 6 * e + 2])


def base_poses(model, s) -> np.ndarray:
    """(n_m, 3) array of base (x, y, yaw)."""
    s = np.asarray(s, dtype=float)
    idx = model.base_indices()
    return np.stack([s[6 * idx + 3], s[6 * idx + 4], s[6 * idx]], axis=1)


def task_residual(model, s, target) -> np.ndarray:
    r = ee_state(model, s) - np.asarray(target, dtype=float)
    return np.where(model.mask_array, r, 0.0)


def objective(model, s_hat, u, target, lam) -> float:
    r = task_residual(model, s_hat, target)
    C = model.system.evaluate(s_hat, u)
    return 0.5 * float(r @ r) + lam * 0.5 * float(C @ C)


@dataclass
class _Point:
    u: np.ndarray
    s: np.ndarray
    O: float
    grad: np.ndarray
    dsdu: np.ndarray
    energy: float
    fk_iters: int = 0


def _evaluate(model, u, s_hat, target, lam, fk):
    E, _, H, Gu, d = energy_derivatives(model, s_hat, u, fk.hessian_mode)
    dsdu = state_sensitivity(model, s_hat, u, fk, derivs=(H, Gu))
    r = task_residual(model, s_hat, target)
    grad = r @ dsdu[ee_rows(model)] + lam * (d.C @ d.Ju)
    O = 0.5 * float(r @ r) + lam * E
    return O, grad, dsdu, E


def objective_gradient(model, s_hat, u, target, lam, fk: FkConfig | None = None) -> np.ndarray:
    """dO/du over all control slots (frozen slots included)."""
    return _evaluate(model, np.asarray(u, float), np.asarray(s_hat, float), target, lam, fk or FkConfig())[1]


def _solve_point(model, u, s_guess, target, cfg, fk=None):
    rep = solve_fk(model, s_guess, u, fk or cfg.fk)
    if not rep.converged:
        return None
    O, grad, dsdu, E = _evaluate(model, u, rep.s_hat, target, cfg.lam, cfg.fk)
    return _Point(u, rep.s_hat, O, grad, dsdu, E, rep.iters)


@dataclass
class IkResult:
    u: np.ndarray
    s: np.ndarray
    objective: float
    grad_norm: float
    iters: int
    converged: bool
    status: str
    energy: float
    task_error: float
    wall_time: float
    fk_solves: int = 0
    hinv: np.ndarray | None = None


def _gauss_newton_inverse(model, dsdu_free, rcond=1e-10):
    # Pseudo-inverse of J^T J with J = dX/du over all six end-effector
    # coordinates, masked or not. The objective ignores masked-out
    # coordinates, but using them in the metric makes early steps hold them
    # still instead of letting a redundant mechanism drift. Control
    # directions that do not move the end effector get the conservative
    # scale 1/sigma_max^2.
    J = dsdu_free[ee_rows(model)]
    _, sv, Vt = np.linalg.svd(J, full_matrices=True)
    smax = sv[0] if sv.size else 1.0
    rank = int(np.sum(sv > rcond * smax))
    V = Vt.T
    Vr = V[:, :rank]
    Vn = V[:, rank:]
    return (Vr / sv[:rank] ** 2) @ Vr.T + (Vn @ Vn.T) / smax**2


def solve_ik_step(model, s, u, target, cfg: IkConfig | None = None, hinv=None) -> IkResult:
    """BFGS minimization of the task objective starting from a feasible (s, u).

    ``hinv`` optionally seeds the inverse-Hessian approximation (e.g. from
    the previous sub-step of the same waypoint). Returns the best point
    found; ``status`` is 'converged', 'max_iters' or 'line_search_failed'.
    """
    cfg = cfg or IkConfig()
    t0 = time.perf_counter()
    target = np.asarray(target, dtype=float)
    free = model.free_slots
    u = np.array(u, dtype=float)
    cur = _solve_point(model, u, np.array(s, dtype=float), target, cfg)
    if cur is None:
        raise SolverBreakdown("forward solve at the starting controls did not converge")
    fk_solves = 1
    trial_fk = dataclasses.replace(cfg.fk, max_iters=min(cfg.fk.max_iters, cfg.trial_fk_iters))
    H = None if hinv is None else np.array(hinv, dtype=float)
    status = "max_iters"
    it = 0
    while True:
        g = cur.grad[free]
        if np.max(np.abs(g), initial=0.0) <= cfg.grad_tol:
            status = "converged"
            break
        if it >= cfg.max_outer_iters:
            break
        gg = float(g @ g)
        first = H is None
        if first:
            if cfg.hessian_seed == "gauss-newton":
                H = _gauss_newton_inverse(model, cur.dsdu[:, free])
            else:
                H = min(2.0 * cur.O / gg, cfg.first_step / math.sqrt(gg)) * np.eye(len(free))
        p = -H @ g
        slope = float(g @ p)
        if slope >= 0.0:
            # not a descent direction; restart from steepest descent
            H = min(2.0 * cur.O / gg, cfg.first_step / math.sqrt(gg)) * np.eye(len(free))
            p = -H @ g
            slope = float(g @ p)
        alpha = 1.0
        new = None
        for _ in range(cfg.max_backtracks):
            step = alpha * p
            u_try = cur.u.copy()
            u_try[free] += step
            s_guess = cur.s + cur.dsdu[:, free] @ step
            try:
                trial = _solve_point(model, u_try, s_guess, target, cfg, trial_fk)
            except (SolverBreakdown, SingularSensitivity):
                trial = None
            fk_solves += 1
            if trial is not None and trial.O <= cur.O + cfg.armijo * alpha * slope:
                new = trial
                break
            alpha *= cfg.shrink
        if new is None:
            status = "line_search_failed"
            break
        sk = new.u[free] - cur.u[free]
        yk = new.grad[free] - g
        ys = float(yk @ sk)
        yy = float(yk @ yk)
        if first and cfg.hessian_seed == "identity" and ys > 0.0 and yy > 0.0:
            H = (ys / yy) * np.eye(len(free))
        if ys > cfg.curvature_eps * math.sqrt(yy * float(sk @ sk)):
            rho = 1.0 / ys
            V = np.eye(len(free)) - rho * np.outer(sk, yk)
            H = V @ H @ V.T + rho * np.outer(sk, sk)
        cur = new
        it += 1
    r = task_residual(model, cur.s, target)
    return IkResult(
        u=cur.u,
        s=cur.s,
        objective=cur.O,
        grad_norm=float(np.max(np.abs(cur.grad[free]), initial=0.0)),
        iters=it,
        converged=status == "converged",
        status=status,
        energy=cur.energy,
        task_error=float(np.max(np.abs(r))),
        wall_time=time.perf_counter() - t0,
        fk_solves=fk_solves,
        hinv=H,
    )


def subdivide(start, goal, mask, trans_step, rot_step) -> list[np.ndarray]:
    """Evenly spaced sub-targets from ``start`` (excluded) to ``goal`` (included).

    Only masked coordinates are interpolated; masked-out entries take the
    goal's values. Consecutive sub-targets differ by at most ``trans_step``
    in translation norm and ``rot_step`` per angle.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    start = np.where(mask, start, goal)
    delta = goal - start
    n_t = math.ceil(np.linalg.norm(delta[:3]) / trans_step - 1e-9)
    n_r = math.ceil(np.max(np.abs(delta[3:])) / rot_step - 1e-9)
    n = max(1, n_t, n_r)
    subs = [start + delta * (i / n) for i in range(1, n)]
    subs.append(goal.copy())
    return subs


@dataclass
class TrackRow:
    waypoint: int
    substep: int
    target: np.ndarray
    achieved: np.ndarray
    u: np.ndarray
    bases: np.ndarray
    iters: int
    wall_time: float
    status: str
    task_error: float
    energy: float


@dataclass
class TrackReport:
    rows: list[TrackRow]
    mask: tuple[bool, ...]
    final_state: np.ndarray | None = None
    final_controls: np.ndarray | None = None

    def __len__(self):
        return len(self.rows)

    def targets(self) -> np.ndarray:
        return np.array([r.target for r in self.rows]).reshape(-1, 6)

    def achieved(self) -> np.ndarray:
        return np.array([r.achieved for r in self.rows]).reshape(-1, 6)

    def controls(self) -> np.ndarray:
        return np.array([r.u for r in self.rows])

    def base_tracks(self) -> np.ndarray:
        """(n_rows, n_m, 3) base (x, y, yaw)."""
        return np.array([r.bases for r in self.rows])

    def rmse(self) -> np.ndarray:
        """Per-coordinate RMSE of achieved vs commanded (NaN where unmasked)."""
        if not self.rows:
            return np.full(6, np.nan)
        err = self.achieved() - self.targets()
        out = np.sqrt(np.mean(err**2, axis=0))
        return np.where(np.array(self.mask), out, np.nan)

    @property
    def all_converged(self) -> bool:
        return all(r.status == "converged" for r in self.rows)


def track_waypoints(model, s0, u0, targets, cfg: IkConfig | None = None, progress=None) -> TrackReport:
    """Follow a list of end-effector targets with step-limited IK solves.

    Each waypoint is split into sub-targets (see :func:`subdivide`). The
    state and controls are chained through the sub-steps; a failed
    sub-step is recorded and tracking resumes from the last good point.
    The BFGS approximation is carried across the sub-steps of one
    waypoint and reset at every waypoint boundary.
    """
    cfg = cfg or IkConfig()
    s = np.array(s0, dtype=float)
    u = np.array(u0, dtype=float)
    command = ee_state(model, s)
    rows = []
    for w, goal in enumerate(targets):
        goal = np.asarray(goal, dtype=float)
        if goal.shape != (6,) or not np.all(np.isfinite(goal)):
            raise ValueError(f"waypoint {w} must be 6 finite numbers")
        if cfg.subdivide:
            subs = subdivide(command, goal, model.mask_array, cfg.trans_step, cfg.rot_step)
        else:
            subs = [goal]
        hinv = None
        for j, sub in enumerate(subs):
            try:
                res = solve_ik_step(model, s, u, sub, cfg, hinv=hinv)
                status = res.status
            except (SolverBreakdown, SingularSensitivity) as exc:
                res = None
                status = f"error:{type(exc).__name__}"
            if res is not None and res.converged:
                s, u, hinv = res.s, res.u, res.hinv
            else:
                hinv = None
            r = task_residual(model, s, sub)
            C = model.system.evaluate(s, u)
            rows.append(
                TrackRow(
                    waypoint=w,
                    substep=j,
                    target=sub,
                    achieved=ee_state(model, s),
                    u=u.copy(),
                    bases=base_poses(model, s),
                    iters=res.iters if res is not None else 0,
                    wall_time=res.wall_time if res is not None else 0.0,
                    status=status,
                    task_error=float(np.max(np.abs(r))),
                    energy=0.5 * float(C @ C),
                )
            )
            if progress is not None:
                progress(rows[-1])
        command = np.where(model.mask_array, goal, command)
    return TrackReport(rows, tuple(model.task_mask), s, u)


# -- canonical motion profiles -----------------------------------------------------


def sequential_profile(reference, translation=0.1, rotation=0.4):
    """Per-DOF staircase: y, then z, then x, then yaw, each +a, -a, back to 0."""
    reference = np.asarray(reference, dtype=float)
    out = []
    for coord, amp in ((1, translation), (2, translation), (0, translation), (3, rotation)):
        for level in (amp, -amp, 0.0):
            wp = reference.copy()
            wp[coord] += level
            out.append(wp)
    return out


def simultaneous_profile(reference, translation=0.1, rotation=0.4, n=16):
    """All four (x, y, z, yaw) coordinates moving together along one cycle."""
    reference = np.asarray(reference, dtype=float)
    out = []
    for k in range(1, n + 1):
        ph = 2.0 * math.pi * k / n
        wp = reference.copy()
        wp[0] += translation * math.sin(ph)
        wp[1] += translation * math.sin(2.0 * ph) * 0.5 + translation * 0.5 * (1 - math.cos(ph))
        wp[2] += translation * 0.5 * math.sin(ph + 0.5) - translation * 0.5 * math.sin(0.5)
        wp[3] += rotation * math.sin(ph)
        out.append(wp)
    return out


def combined_perturbation(reference, mask, translation=0.010, rotation=0.005):
    """One small combined move: translation split over x, y, z and every task angle rotated."""
    target = np.asarray(reference, dtype=float).copy()
    mask = np.asarray(mask, dtype=bool)
    tmask = mask[:3]
    if tmask.any():
        direction = tmask / np.linalg.norm(tmask.astype(float))
        target[:3] += translation * direction
    target[3:] += np.where(mask[3:], rotation, 0.0)
    return target
