import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.assembly import CANONICAL_NAMES, shipped_scene_text, load_scene
from ccma.constraints import (
    ROW_COUNTS,
    WORLD,
    ConstraintBlock,
    ConstraintSystem,
    DimensionError,
    Kind,
    eval_fixed,
    eval_motor_xy,
    eval_motor_z,
    eval_planar_base,
    eval_revolute,
    eval_spherical,
    evaluate_block,
)
from ccma.rigidbody import RigidBodyState, rotation_matrix

from conftest import assembled

I = RigidBodyState()


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def _local(state, world_point):
    return tuple(state.rotation().T @ (np.asarray(world_point) - np.asarray(state.t)))


def _local_axis(state, world_axis):
    return tuple(state.rotation().T @ np.asarray(world_axis))


def _random_state(rng):
    return RigidBodyState(*rng.uniform(-1, 1, 3), tuple(rng.uniform(-1, 1, 3)))


def _jacobian_rank(block, si, sj, n_u=0, u=None):
    system = ConstraintSystem([block], 2, n_u)
    s = np.concatenate([si.as_vector(), sj.as_vector()])
    u = np.zeros(n_u) if u is None else u
    d = system.derivatives(s, u)
    assert np.max(np.abs(d.C)) < 1e-12, "configuration is not assembled"
    sv = np.linalg.svd(d.Js, compute_uv=False)
    return int(np.sum(sv > 1e-8))


# -- per-kind examples -------------------------------------------------------------


def test_revolute_assembled_is_zero():
    z = (0, 0, 0)
    assert np.array_equal(eval_revolute(I, I, z, z, (0, 0, 1), (0, 0, 1)), np.zeros(6))


def test_revolute_translation_sign_is_j_minus_i():
    sj = RigidBodyState(t=(0.1, 0, 0))
    z = (0, 0, 0)
    np.testing.assert_allclose(eval_revolute(I, sj, z, z, (0, 0, 1), (0, 0, 1)), [0.1, 0, 0, 0, 0, 0])
    # moving body i instead flips the sign
    np.testing.assert_allclose(eval_revolute(sj, I, z, z, (0, 0, 1), (0, 0, 1)), [-0.1, 0, 0, 0, 0, 0])


def test_spherical_is_blind_to_rotation_about_the_anchor():
    anchor_world = np.array([0.3, -0.2, 0.5])
    si = RigidBodyState(0.2, 0.1, -0.3, (0.0, 0.0, 0.0))
    sj = RigidBodyState(-1.0, 0.4, 0.7, (0.1, 0.2, 0.3))
    p_i, p_j = _local(si, anchor_world), _local(sj, anchor_world)
    assert np.max(np.abs(eval_spherical(si, sj, p_i, p_j))) < 1e-15
    # spin body j about the anchor: new translation keeps the anchor in place
    R2 = rotation_matrix(0.5, -0.3, 0.2)
    t2 = anchor_world - R2 @ np.asarray(p_j)
    sj2 = RigidBodyState(0.5, -0.3, 0.2, tuple(t2))
    assert np.max(np.abs(eval_spherical(si, sj2, p_i, p_j))) < 1e-15


def test_fixed_rotation_about_first_axis_only_breaks_second_axis_rows():
    z = (0, 0, 0)
    sj = RigidBodyState(alpha=0.1)
    C = eval_fixed(I, sj, z, z, (1, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 0))
    assert np.max(np.abs(C[:6])) < 1e-15
    assert np.max(np.abs(C[6:])) > 0.05
    np.testing.assert_allclose(C[6:], [0, math.cos(0.1) - 1, math.sin(0.1)], atol=1e-15)


def test_planar_base_examples():
    assert np.array_equal(eval_planar_base(I), np.zeros(4))
    np.testing.assert_allclose(eval_planar_base(RigidBodyState(t=(0, 0, 0.05))), [0.05, 0, 0, 0])
    tilted = RigidBodyState(alpha=0.1)
    expected = rotation_matrix(0, 0, 0.1) @ [0, 0, 1] - np.array([0, 0, 1])
    C = eval_planar_base(tilted)
    assert C[0] == 0.0
    np.testing.assert_allclose(C[1:], expected, atol=1e-15)


def test_motor_xy_examples():
    base = RigidBodyState(t=(1.0, 2.0, 0.0))
    assert np.array_equal(eval_motor_xy(base, [0.0, 1.0, 2.0], (1, 2)), [0.0, 0.0])
    assert np.array_equal(eval_motor_xy(base, [0.0, 1.0, 2.0], (0, 0)), [1.0, 2.0])


def test_motor_z_examples():
    assert np.max(np.abs(eval_motor_z(I, [0.0], 0))) == 0.0
    assert np.max(np.abs(eval_motor_z(RigidBodyState(gamma=0.3), [-0.3], 0))) < 1e-15
    # the opposite sign is not a solution
    assert np.max(np.abs(eval_motor_z(RigidBodyState(gamma=0.3), [0.3], 0))) > 0.1


def test_motor_z_control_derivative_matches_central_difference():
    block = ConstraintBlock(Kind.MOTOR_Z, 0, WORLD, axes=((1.0, 0.0, 0.0),), control_slots=(0,))
    system = ConstraintSystem([block], 1, 1)
    s = RigidBodyState(0.7, 0.05, -0.02, (0.3, 0.1, 0.0)).as_vector()
    u = np.array([0.4])
    h = 1e-5
    fd = (system.evaluate(s, u + h) - system.evaluate(s, u - h)) / (2 * h)
    d = system.derivatives(s, u)
    assert np.max(np.abs(d.Ju[:, 0] - fd)) / np.max(np.abs(fd)) < 1e-6


def test_motor_xy_control_jacobian_is_minus_identity_and_linear():
    block = ConstraintBlock(Kind.MOTOR_XY, 0, WORLD, control_slots=(1, 2))
    system = ConstraintSystem([block], 1, 3)
    s = RigidBodyState(0.3, 0.2, 0.1, (1.0, 2.0, 0.5)).as_vector()
    u = np.array([9.0, 0.5, -0.5])
    d = system.derivatives(s, u, order=2)
    np.testing.assert_array_equal(d.Ju, [[0, -1, 0], [0, 0, -1]])
    Tss, Tsu = system.second_derivative_tensors(s, u)
    assert not Tss.any() and not Tsu.any()


# -- ranks at assembled configurations -----------------------------------------------


def test_kind_ranks_at_generic_assembled_poses():
    rng = np.random.default_rng(11)
    si, sj = _random_state(rng), _random_state(rng)
    P = rng.uniform(-1, 1, 3)
    V = _unit(rng.normal(size=3))
    W = _unit(np.cross(V, rng.normal(size=3)))
    anchors = (_local(si, P), _local(sj, P))
    rev = ConstraintBlock(Kind.REVOLUTE, 0, 1, anchors, (_local_axis(si, V), _local_axis(sj, V)))
    sph = ConstraintBlock(Kind.SPHERICAL, 0, 1, anchors)
    fix = ConstraintBlock(
        Kind.FIXED, 0, 1, anchors, (_local_axis(si, V), _local_axis(sj, V), _local_axis(si, W), _local_axis(sj, W))
    )
    uni = ConstraintBlock(Kind.UNIVERSAL, 0, 1, anchors, (_local_axis(si, V), _local_axis(sj, W)))
    pri = ConstraintBlock(
        Kind.PRISMATIC, 0, 1, anchors, (_local_axis(si, V), _local_axis(sj, V), _local_axis(si, W), _local_axis(sj, W))
    )
    assert _jacobian_rank(rev, si, sj) == 5
    assert _jacobian_rank(sph, si, sj) == 3
    assert _jacobian_rank(fix, si, sj) == 6
    assert _jacobian_rank(uni, si, sj) == 4
    assert _jacobian_rank(pri, si, sj) == 5


def test_planar_base_rank_three_with_two_independent_normal_rows():
    block = ConstraintBlock(Kind.PLANAR_BASE, 0, WORLD, axes=((0.0, 0.0, 1.0),))
    system = ConstraintSystem([block], 1, 0)
    s = RigidBodyState(0.8, 0.0, 0.0, (0.4, -0.3, 0.0)).as_vector()
    d = system.derivatives(s, np.zeros(0))
    assert not d.C.any()
    sv = np.linalg.svd(d.Js, compute_uv=False)
    assert int(np.sum(sv > 1e-8)) == 3
    sv_normal = np.linalg.svd(d.Js[1:], compute_uv=False)
    assert int(np.sum(sv_normal > 1e-8)) == 2


# -- block bookkeeping ---------------------------------------------------------------


def test_block_rejects_wrong_control_slot_count():
    with pytest.raises(ValueError):
        ConstraintBlock(Kind.MOTOR_XY, 0, WORLD, control_slots=(0,))
    with pytest.raises(ValueError):
        ConstraintBlock(Kind.REVOLUTE, 0, 1, ((0, 0, 0), (0, 0, 0)), ((0, 0, 1), (0, 0, 1)), control_slots=(0,))


def test_row_counts_by_kind():
    assert {k.value: n for k, n in ROW_COUNTS.items()} == {
        "revolute": 6,
        "spherical": 3,
        "fixed": 9,
        "universal": 4,
        "prismatic": 8,
        "planar_base": 4,
        "motor_xy": 2,
        "motor_z": 3,
    }


def test_reduced_scene_row_count_matches_the_shipped_file():
    text = shipped_scene_text("ccma-4dof-reduced")
    import yaml

    doc = yaml.safe_load(text)
    per_base = ROW_COUNTS[Kind.PLANAR_BASE] + ROW_COUNTS[Kind.MOTOR_XY] + ROW_COUNTS[Kind.MOTOR_Z]
    expected = len(doc["bases"]) * per_base + sum(ROW_COUNTS[Kind(j["kind"])] for j in doc["joints"])
    model = load_scene(text)
    assert model.n_rows == expected
    offsets = [b.row_offset for b in model.blocks]
    assert offsets == sorted(offsets) and offsets[0] == 0


def test_dimension_mismatch_names_a_block(reduced):
    model, s0, u0 = reduced
    with pytest.raises(DimensionError) as exc:
        model.system.evaluate(s0[:-6], u0)
    assert exc.value.block is not None and "block" in str(exc.value)
    with pytest.raises(DimensionError) as exc:
        model.system.evaluate(s0, u0[:-3])
    assert exc.value.block is not None and exc.value.block.control_slots


def test_system_rejects_out_of_range_body():
    block = ConstraintBlock(Kind.SPHERICAL, 0, 3, ((0, 0, 0), (0, 0, 0)))
    with pytest.raises(DimensionError):
        ConstraintSystem([block], 2, 0)


def test_assembled_scene_is_feasible(scene):
    model, s0, u0 = scene
    assert np.max(np.abs(model.system.evaluate(s0, u0))) < 1e-9


def test_base_command_change_touches_only_its_motor_rows(reduced):
    model, s0, u0 = reduced
    u = u0.copy()
    u[0] += 0.1
    changed = np.flatnonzero(model.system.evaluate(s0, u) != model.system.evaluate(s0, u0))
    block = next(b for b in model.blocks if b.kind is Kind.MOTOR_XY and 0 in b.control_slots)
    assert changed.tolist() == [block.row_offset]


def test_control_jacobian_rows_vanish_outside_motor_blocks(scene):
    model, s0, u0 = scene
    d = model.system.derivatives(s0, u0)
    for block, sl in zip(model.blocks, model.system.block_slices):
        if block.kind not in (Kind.MOTOR_XY, Kind.MOTOR_Z):
            assert not d.Ju[sl].any()


def test_direct_block_evaluation_matches_the_system(scene):
    model, s0, u0 = scene
    rng = np.random.default_rng(5)
    s = s0 + rng.normal(0, 0.05, s0.size)
    u = u0 + rng.normal(0, 0.05, u0.size)
    C = model.system.evaluate(s, u)
    for block, sl in zip(model.blocks, model.system.block_slices):
        np.testing.assert_allclose(evaluate_block(block, s, u), C[sl], atol=1e-14)


def test_jacobian_sparsity_follows_incident_bodies(reduced):
    model, s0, u0 = reduced
    d = model.system.derivatives(s0 + 0.01, u0)
    for block, sl in zip(model.blocks, model.system.block_slices):
        cols = np.flatnonzero(np.any(d.Js[sl] != 0, axis=0))
        allowed = {6 * b + k for b in block.bodies for k in range(6)}
        assert set(cols.tolist()) <= allowed


# -- backend agreement and finite-difference oracles -----------------------------------


def test_numpy_and_compiled_backends_agree(scene):
    model, s0, u0 = scene
    rng = np.random.default_rng(9)
    ref = ConstraintSystem(model.blocks, model.n_b, model.n_u, backend="numpy")
    fast = ConstraintSystem(model.blocks, model.n_b, model.n_u, backend="compiled")
    s = s0 + rng.normal(0, 0.1, s0.size)
    u = u0 + rng.normal(0, 0.1, u0.size)
    w = rng.normal(size=model.n_rows)
    a = ref.derivatives(s, u, order=2)
    b = fast.derivatives(s, u, order=2)
    np.testing.assert_allclose(b.C, a.C, atol=1e-13)
    np.testing.assert_allclose(b.Js, a.Js, atol=1e-13)
    np.testing.assert_allclose(b.Ju, a.Ju, atol=1e-13)
    for x, y in zip(b.contract(w), a.contract(w)):
        np.testing.assert_allclose(x, y, atol=1e-12)
    # dense tensors, contracted by hand, are a third route
    Tss, Tsu = ref.second_derivative_tensors(s, u)
    Hss, Hsu = b.contract(w)
    np.testing.assert_allclose(np.einsum("r,rab->ab", w, Tss), Hss, atol=1e-12)
    np.testing.assert_allclose(np.einsum("r,rab->ab", w, Tsu), Hsu, atol=1e-12)


def _central(f, x, h):
    cols = []
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((f(xp) - f(xm)) / (2 * h))
    return np.stack(cols, axis=-1)


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


@pytest.mark.parametrize("name", CANONICAL_NAMES)
def test_derivatives_match_central_differences_at_50_points(name):
    model, s0, u0 = assembled(name)
    system = model.system
    rng = np.random.default_rng(21)
    h = 1e-5
    worst = 0.0
    for _ in range(50):
        s = s0 + rng.normal(0, 0.05, s0.size)
        u = u0 + rng.normal(0, 0.05, u0.size)
        d = system.derivatives(s, u, order=2)
        w = rng.normal(size=system.n_rows)
        Hss, Hsu = d.contract(w)
        worst = max(
            worst,
            _rel(d.Js, _central(lambda x: system.evaluate(x, u), s, h)),
            _rel(d.Ju, _central(lambda x: system.evaluate(s, x), u, h)),
            _rel(Hss, _central(lambda x: system.derivatives(x, u).Js.T @ w, s, h)),
            _rel(Hsu, _central(lambda x: system.derivatives(s, x).Js.T @ w, u, h)),
        )
    assert worst < 1e-6


kinds = st.sampled_from([Kind.REVOLUTE, Kind.SPHERICAL, Kind.FIXED, Kind.UNIVERSAL, Kind.PRISMATIC])
small = st.floats(-1.5, 1.5, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(kinds, st.lists(small, min_size=12, max_size=12), st.integers(0, 2**31 - 1))
def test_any_two_body_block_has_exact_first_derivatives(kind, state_values, seed):
    rng = np.random.default_rng(seed)
    ortho = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    anchors = (tuple(rng.uniform(-0.5, 0.5, 3)), tuple(rng.uniform(-0.5, 0.5, 3)))
    n_axes = {Kind.REVOLUTE: 2, Kind.SPHERICAL: 0, Kind.FIXED: 4, Kind.UNIVERSAL: 2, Kind.PRISMATIC: 4}[kind]
    axes = tuple(tuple(ortho[k % 2]) if kind is not Kind.UNIVERSAL else tuple(ortho[k]) for k in range(n_axes))
    block = ConstraintBlock(kind, 0, 1, anchors, axes)
    system = ConstraintSystem([block], 2, 0)
    s = np.array(state_values)
    u = np.zeros(0)
    fd = _central(lambda x: system.evaluate(x, u), s, 1e-6)
    np.testing.assert_allclose(system.derivatives(s, u).Js, fd, atol=1e-8)
