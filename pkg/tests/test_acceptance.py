"""End-to-end acceptance checks, one test per numbered criterion.

Each test records a PASS/FAIL line through the ``acceptance`` fixture
before asserting, so the terminal summary lists every criterion even when
one of them fails.
"""

import time

import numpy as np
import pytest

from ccma.assembly import CANONICAL_NAMES, resolve_scene
from ccma.base_sim import simulate_execution
from ccma.cli import bench_scene
from ccma.forward_solver import solve_fk
from ccma.ik_control import ee_state, sequential_profile, simultaneous_profile, track_waypoints
from ccma.validation import validate_scene
from conftest import assembled

FOUR_DOF = ("ccma-4dof-reduced", "ccma-4dof-complete")
PROFILES = {"sequential": sequential_profile, "simultaneous": simultaneous_profile}


@pytest.fixture(scope="module")
def tracks():
    """Every profile on every 4-DOF scene, solved once for criteria 5, 7 and 8."""
    out = {}
    for name in FOUR_DOF:
        model, s0, u0 = assembled(name)
        for label, profile in PROFILES.items():
            out[name, label] = track_waypoints(model, s0, u0, profile(ee_state(model, s0)))
    return out


def test_criterion_1_derivative_oracles(acceptance):
    t0 = time.perf_counter()
    reports = [validate_scene(*assembled(name), h_local=1e-5, h_pipeline=1e-6, name=name) for name in CANONICAL_NAMES]
    elapsed = time.perf_counter() - t0
    failures = [f"{r.name}:{f.layer}" for r in reports for f in r.failures()]
    worst = {}
    for r in reports:
        for layer in r.layers:
            worst[layer.layer] = max(worst.get(layer.layer, 0.0), layer.max_rel_error)
    detail = f"worst rel. errors {', '.join(f'{k}={v:.1e}' for k, v in worst.items())}; {elapsed:.1f} s"
    assert acceptance(1, not failures and elapsed < 60.0, detail), failures


def test_criterion_2_forward_solve_feasibility(acceptance):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    failed = []
    worst_energy = worst_block = 0.0
    for name in CANONICAL_NAMES:
        model, s0, u0 = assembled(name)
        for k in range(100):
            # uniform on a 30 mm disk per base; headings stay at the reference
            u = u0.copy()
            radius = 0.03 * np.sqrt(rng.uniform(size=model.n_m))
            phase = rng.uniform(0.0, 2.0 * np.pi, model.n_m)
            u[0::3] += radius * np.cos(phase)
            u[1::3] += radius * np.sin(phase)
            rep = solve_fk(model, s0, u)
            block = max(rep.block_residuals.values())
            worst_energy = max(worst_energy, rep.energy)
            worst_block = max(worst_block, block)
            if not (rep.converged and rep.energy < 1e-16 and block < 1e-7):
                failed.append((name, k))
    elapsed = time.perf_counter() - t0
    detail = f"{len(failed)}/500 failed; max E={worst_energy:.1e}, max block={worst_block:.1e}; {elapsed:.1f} s"
    assert acceptance(2, not failed and elapsed < 30.0, detail), failed[:5]


def test_criterion_3_control_dimensions(acceptance):
    counts = {name: resolve_scene(name).n_free for name in FOUR_DOF}
    ok = counts == {"ccma-4dof-reduced": 6, "ccma-4dof-complete": 9}
    assert acceptance(3, ok, ", ".join(f"{k}={v}" for k, v in counts.items())), counts


def test_criterion_4_frozen_heading_invariance(acceptance):
    model, s0, u0 = assembled("ccma-4dof-reduced")
    frozen = list(model.frozen_slots)
    u = u0.copy()
    u[0::3] += 0.02
    u[1::3] -= 0.01
    a = solve_fk(model, s0, u)
    u[frozen] += 1.0
    b = solve_fk(model, s0, u)
    diff = float(np.max(np.abs(ee_state(model, a.s_hat) - ee_state(model, b.s_hat))))
    ok = a.assembled and b.assembled and diff <= 1e-8
    assert acceptance(4, ok, f"max ee difference {diff:.1e}"), diff


def test_criterion_5_ik_tracking(acceptance, tracks):
    worst = {key: max(r.task_error for r in rep.rows) for key, rep in tracks.items()}
    converged = all(rep.all_converged for rep in tracks.values())
    ok = converged and max(worst.values()) < 1e-6
    detail = "; ".join(f"{name.split('-')[-1]}/{label} max {err:.1e}" for (name, label), err in worst.items())
    assert acceptance(5, ok, detail), worst


def test_criterion_6_convergence_effort_ordering(acceptance):
    groups = {
        "4dof/3": ("ccma-4dof-reduced", "ccma-4dof-complete"),
        "6dof/3": ("ccma-6dof-sym", "ccma-6dof-asym"),
        "6dof/6": ("ccma-6dof-6agents",),
    }
    scene_median = {}
    group_median = {}
    for group, names in groups.items():
        pooled = []
        for name in names:
            model, s0, u0 = assembled(name)
            bench_scene(model, s0, u0, 3)  # warm caches and compiled kernels
            times, _ = bench_scene(model, s0, u0, 30)
            scene_median[name] = float(np.median(times))
            pooled += times
        group_median[group] = float(np.median(pooled))
    g = list(group_median.values())
    ok = g[0] < g[1] < g[2] and max(scene_median.values()) < 0.05
    detail = ", ".join(f"{k} {1e3 * v:.2f} ms" for k, v in group_median.items())
    detail += f"; slowest scene {1e3 * max(scene_median.values()):.2f} ms"
    assert acceptance(6, ok, detail), (group_median, scene_median)


def test_criterion_7_open_loop_error_mechanism(acceptance, tracks):
    model, s0, u0 = assembled("ccma-4dof-reduced")
    track = tracks["ccma-4dof-reduced", "sequential"]
    noisy = [simulate_execution(model, track, s0, u0, noise_sigma=0.005, seed=seed).position_rmse() for seed in range(20)]
    clean = simulate_execution(model, track, s0, u0, noise_sigma=0.0).position_rmse()
    ok = all(0.003 <= r <= 0.030 for r in noisy) and clean < 1e-4
    detail = f"sigma=5 mm RMSE {1e3 * min(noisy):.1f}..{1e3 * max(noisy):.1f} mm over 20 seeds; sigma=0 RMSE {clean:.1e} m"
    assert acceptance(7, ok, detail), (noisy, clean)


def test_criterion_8_step_limit_compliance(acceptance, tracks):
    worst_pos = worst_ang = 0.0
    for (name, _), rep in tracks.items():
        model, s0, _ = assembled(name)
        path = np.vstack([ee_state(model, s0), rep.targets()])
        steps = np.diff(path, axis=0)
        worst_pos = max(worst_pos, float(np.max(np.linalg.norm(steps[:, :3], axis=1))))
        worst_ang = max(worst_ang, float(np.max(np.abs(steps[:, 3:]))))
    ok = worst_pos <= 0.010 + 1e-12 and worst_ang <= 0.005 + 1e-12
    detail = f"largest sub-step {1e3 * worst_pos:.3f} mm, {worst_ang:.4f} rad"
    assert acceptance(8, ok, detail), (worst_pos, worst_ang)
