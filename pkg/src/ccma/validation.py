"""Finite-difference checks of every analytic derivative layer.

Local layers (constraint Jacobians, their weighted second derivatives,
dE/ds, d2E/ds2) are checked at random, generally infeasible, (s, u)
points with central differences of step ``h_local``. Pipeline layers
(dG/du, ds/du, dO/du) are checked at random feasible points with step
``h_pipeline``; ds/du and dO/du difference complete forward solves.

The relative error of a layer is ``max|analytic - numeric| / max|numeric|``
over the whole array, and the worst entry is reported by index.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .forward_solver import FkConfig, energy, energy_derivatives, solve_fk, state_sensitivity
from .ik_control import ee_state, objective, objective_gradient

LOCAL_LAYERS = ("jacobian_s", "jacobian_u", "second_ss", "second_su", "dE_ds", "d2E_ds2")
PIPELINE_LAYERS = ("dG_du", "ds_du", "dO_du")
LAYERS = LOCAL_LAYERS + PIPELINE_LAYERS

LOCAL_TOL = 1e-6
PIPELINE_TOL = 1e-4

# forward solves used as a finite-difference oracle must be far tighter
# than the working tolerance
ORACLE_FK = FkConfig(grad_tol=1e-13, max_iters=200)


def central_difference(f, x, h):
    """Jacobian of ``f`` at ``x`` by central differences; shape out.shape + (len(x),)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def relative_error(analytic, numeric, floor=1e-12):
    """(relative error, index of the worst entry)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    diff = np.abs(analytic - numeric)
    if diff.size == 0:
        return 0.0, ()
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    scale = max(float(np.max(np.abs(numeric))), floor)
    return float(diff[worst]) / scale, tuple(int(i) for i in worst)


@dataclass
class LayerResult:
    layer: str
    max_rel_error: float
    worst_index: tuple
    worst_trial: int
    tolerance: float
    trials: int

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < self.tolerance)


@dataclass
class ValidationReport:
    scene: str
    layers: list[LayerResult]
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.layers)

    def failures(self) -> list[LayerResult]:
        return [r for r in self.layers if not r.passed]


def _local_point(model, s0, u0, rng, spread=0.05):
    s = s0 + rng.normal(0.0, spread, s0.size)
    u = u0 + rng.normal(0.0, spread, u0.size)
    return s, u


def _feasible_point(model, s0, u0, rng, spread=0.01):
    u = u0.copy()
    free = model.free_slots
    u[free] += rng.uniform(-spread, spread, free.size)
    rep = solve_fk(model, s0, u, ORACLE_FK)
    if not rep.converged:
        raise RuntimeError("could not reach a feasible validation point")
    return rep.s_hat, u


def _check_local(model, s, u, h, rng):
    system = model.system
    out = {}
    d = system.derivatives(s, u, order=2)
    out["jacobian_s"] = (d.Js, central_difference(lambda x: system.evaluate(x, u), s, h))
    out["jacobian_u"] = (d.Ju, central_difference(lambda x: system.evaluate(s, x), u, h))
    w = rng.normal(size=system.n_rows)
    Hss, Hsu = d.contract(w)
    out["second_ss"] = (Hss, central_difference(lambda x: system.derivatives(x, u).Js.T @ w, s, h))
    out["second_su"] = (Hsu, central_difference(lambda x: system.derivatives(s, x).Js.T @ w, u, h))
    _, G, H, _, _ = energy_derivatives(model, s, u)
    out["dE_ds"] = (G, central_difference(lambda x: np.atleast_1d(energy(model, x, u)), s, h)[0])
    out["d2E_ds2"] = (H, central_difference(lambda x: energy_derivatives(model, x, u)[1], s, h))
    return out


def _check_pipeline(model, s, u, h, rng, fk):
    out = {}
    _, _, H, Gu, _ = energy_derivatives(model, s, u)
    out["dG_du"] = (Gu, central_difference(lambda x: energy_derivatives(model, s, x)[1], u, h))
    free = model.free_slots
    dsdu = state_sensitivity(model, s, u, fk, derivs=(H, Gu))

    def solved(x_free):
        uu = u.copy()
        uu[free] = x_free
        rep = solve_fk(model, s, uu, ORACLE_FK)
        return rep.s_hat, uu

    out["ds_du"] = (dsdu[:, free], central_difference(lambda x: solved(x)[0], u[free], h))
    target = ee_state(model, s) + rng.normal(0.0, 0.01, 6)
    lam = 0.1
    grad = objective_gradient(model, s, u, target, lam, fk)

    def obj(x_free):
        ss, uu = solved(x_free)
        return np.atleast_1d(objective(model, ss, uu, target, lam))

    out["dO_du"] = (grad[free], central_difference(obj, u[free], h)[0])
    return out


def validate_scene(
    model,
    s0,
    u0,
    *,
    trials: int = 3,
    h_local: float = 1e-5,
    h_pipeline: float = 1e-6,
    seed: int = 0,
    layers=LAYERS,
    corrupt: str | None = None,
    name: str = "",
    fk: FkConfig | None = None,
) -> ValidationReport:
    """Run every requested layer at ``trials`` random points.

    ``corrupt`` names a layer whose analytic value is deliberately
    perturbed; it exists so tests can confirm that a wrong derivative is
    caught and attributed to the right layer.
    """
    unknown = sorted(set(layers) - set(LAYERS))
    if unknown:
        raise ValueError(f"unknown layer(s): {unknown}")
    if corrupt is not None and corrupt not in layers:
        raise ValueError(f"cannot corrupt {corrupt!r}: not among the checked layers")
    fk = fk or FkConfig()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst: dict[str, LayerResult] = {}
    want_local = any(layer in LOCAL_LAYERS for layer in layers)
    want_pipe = any(layer in PIPELINE_LAYERS for layer in layers)
    for trial in range(trials):
        pairs = {}
        if want_local:
            s, u = _local_point(model, s0, u0, rng)
            pairs.update(_check_local(model, s, u, h_local, rng))
        if want_pipe:
            s, u = _feasible_point(model, s0, u0, rng)
            pairs.update(_check_pipeline(model, s, u, h_pipeline, rng, fk))
        for layer in layers:
            analytic, numeric = pairs[layer]
            if layer == corrupt:
                analytic = np.array(analytic, dtype=float)
                k = np.unravel_index(int(np.argmax(np.abs(analytic))), analytic.shape)
                analytic[k] = analytic[k] * 1.01 + 1e-3
            err, idx = relative_error(analytic, numeric)
            tol = LOCAL_TOL if layer in LOCAL_LAYERS else PIPELINE_TOL
            prev = worst.get(layer)
            if prev is None or err > prev.max_rel_error:
                worst[layer] = LayerResult(layer, err, idx, trial, tol, trials)
    return ValidationReport(name, [worst[layer] for layer in layers], time.perf_counter() - t0)


def step_sweep(model, s0, u0, steps=(1e-4, 1e-5, 1e-6, 1e-7), seed=0, layer="dE_ds"):
    """Relative error of one local layer across finite-difference steps.

    Central differences give a V-shaped curve: truncation error shrinks
    like h^2 until rounding error, growing like 1/h, takes over.
    """
    if layer not in LOCAL_LAYERS:
        raise ValueError("step_sweep only supports local layers")
    rng = np.random.default_rng(seed)
    s, u = _local_point(model, s0, u0, rng)
    out = []
    for h in steps:
        analytic, numeric = _check_local(model, s, u, h, np.random.default_rng(seed))[layer]
        out.append((h, relative_error(analytic, numeric)[0]))
    return out

