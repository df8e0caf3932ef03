"""Forward kinematics by minimizing the constraint energy E = 0.5 |C(s, u)|^2.

The solver is a damped Newton iteration on the analytic gradient
G = J^T C and Hessian H = J^T J + sum_r C_r d2C_r/ds2. A Levenberg diagonal
term keeps the step well defined where H is singular or indefinite; it
is cut back after every accepted step so that near a solution the
iteration is plain Newton.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class HessianMode(str, enum.Enum):
    FULL = "full"
    GAUSS_NEWTON = "gauss-newton"


class SolverBreakdown(RuntimeError):
    """Damping escalated past its limit without producing a descent step."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularSensitivity(RuntimeError):
    """Energy Hessian is singular at the solution (kinematic singularity)."""


@dataclass(frozen=True)
class FkConfig:
    grad_tol: float = 1e-10
    max_iters: int = 100
    damping: float = 1e-9
    damping_up: float = 10.0
    damping_down: float = 10.0
    max_damping: float = 1e8
    hessian_mode: HessianMode = HessianMode.FULL
    # energy below which a converged solution counts as assembled
    assembly_tol: float = 1e-16

    def __post_init__(self):
        object.__setattr__(self, "hessian_mode", HessianMode(self.hessian_mode))
        if self.grad_tol <= 0 or self.damping <= 0 or self.assembly_tol <= 0:
            raise ValueError("tolerances and damping must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class SolveReport:
    s_hat: np.ndarray
    energy: float
    grad_norm: float
    iters: int
    wall_time: float
    converged: bool
    assembled: bool = False
    damping: float = 0.0
    block_residuals: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.converged and self.assembled


def energy(model, s, u) -> float:
    C = model.system.evaluate(s, u)
    return 0.5 * float(C @ C)


def energy_gradient(model, s, u) -> np.ndarray:
    d = model.system.derivatives(s, u, order=1)
    return d.Js.T @ d.C


def _hessian_from(d, mode):
    H = d.Js.T @ d.Js
    if HessianMode(mode) is HessianMode.FULL:
        H = H + d.contract(d.C)[0]
    return 0.5 * (H + H.T)


def energy_hessian(model, s, u, mode=HessianMode.FULL) -> np.ndarray:
    order = 2 if HessianMode(mode) is HessianMode.FULL else 1
    return _hessian_from(model.system.derivatives(s, u, order=order), mode)


def mixed_derivative(model, s, u) -> np.ndarray:
    """dG/du at fixed s: J^T dC/du + sum_r C_r d2C_r/dsdu."""
    d = model.system.derivatives(s, u, order=2)
    return d.Js.T @ d.Ju + d.contract(d.C)[1]


def energy_derivatives(model, s, u, mode=HessianMode.FULL):
    """Energy, gradient, Hessian and dG/du from one derivative pass."""
    d = model.system.derivatives(s, u, order=2)
    G = d.Js.T @ d.C
    Hc, Hcu = d.contract(d.C)
    H = d.Js.T @ d.Js
    if HessianMode(mode) is HessianMode.FULL:
        H = H + Hc
    H = 0.5 * (H + H.T)
    Gu = d.Js.T @ d.Ju + Hcu
    return 0.5 * float(d.C @ d.C), G, H, Gu, d


def _factor(H, mu):
    n = H.shape[0]
    return sla.cho_factor(H + mu * np.eye(n), lower=False, check_finite=False)


def solve_fk(model, s_init, u, cfg: FkConfig | None = None) -> SolveReport:
    """Damped Newton minimization of the constraint energy for fixed u."""
    cfg = cfg or FkConfig()
    system = model.system
    s = np.array(s_init, dtype=float)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("initial state is not finite")
    order = 2 if cfg.hessian_mode is HessianMode.FULL else 1
    mu = cfg.damping
    t0 = time.perf_counter()
    history = []
    it = 0
    while True:
        d = system.derivatives(s, u, order=order)
        E = 0.5 * float(d.C @ d.C)
        G = d.Js.T @ d.C
        gnorm = float(np.max(np.abs(G))) if G.size else 0.0
        history.append((E, gnorm))
        if gnorm <= cfg.grad_tol or it >= cfg.max_iters:
            break
        H = _hessian_from(d, cfg.hessian_mode)
        while True:
            try:
                step = -sla.cho_solve(_factor(H, mu), G, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                step = None
            if step is not None:
                s_try = s + step
                C_try = system.evaluate(s_try, u)
                E_try = 0.5 * float(C_try @ C_try)
                if np.isfinite(E_try) and E_try <= E:
                    s = s_try
                    mu = max(mu / cfg.damping_down, cfg.damping)
                    break
            mu *= cfg.damping_up
            if mu > cfg.max_damping:
                report = _report(system, s, u, E, gnorm, it, t0, False, mu, history, cfg)
                raise SolverBreakdown(f"damping exceeded {cfg.max_damping:g} at iteration {it} (E={E:.3e})", report)
        it += 1
    return _report(system, s, u, E, gnorm, it, t0, gnorm <= cfg.grad_tol, mu, history, cfg)


def _report(system, s, u, E, gnorm, it, t0, converged, mu, history, cfg):
    C = system.evaluate(s, u)
    return SolveReport(
        s_hat=s,
        energy=E,
        grad_norm=gnorm,
        iters=it,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        assembled=converged and E <= cfg.assembly_tol,
        damping=mu,
        block_residuals=system.block_residuals(C),
        history=history,
    )


def state_sensitivity(model, s_hat, u, cfg: FkConfig | None = None, *, max_damping: float = 1e-6, derivs=None):
    """ds/du = -(dG/ds)^-1 dG/du at a converged forward solution.

    ``derivs`` may carry a precomputed ``(H, Gu)`` pair. A singular or
    indefinite Hessian is retried with growing diagonal damping up to
    ``max_damping``; past that :class:`SingularSensitivity` is raised.
    """
    cfg = cfg or FkConfig()
    if derivs is None:
        _, _, H, Gu, _ = energy_derivatives(model, s_hat, u, cfg.hessian_mode)
    else:
        H, Gu = derivs
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    mu = 0.0
    while True:
        try:
            fac = _factor(H, mu)
            # the smallest squared pivot bounds the smallest eigenvalue of
            # H + mu I from above; if it is at rounding level, or if the
            # damping itself props it up, H is singular
            pivot_sq = float(np.min(np.abs(np.diag(fac[0])))) ** 2
            if pivot_sq <= max(1e-12 * scale, 10.0 * mu):
                raise np.linalg.LinAlgError("near-singular Hessian")
            return -sla.cho_solve(fac, Gu, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            mu = cfg.damping if mu == 0.0 else mu * cfg.damping_up
            if mu > max_damping:
                raise SingularSensitivity("energy Hessian is singular at the forward solution")
