import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccma.rigidbody import (
    SECOND_ORDER_PAIRS,
    RigidBodyState,
    batch_rotations,
    rotation_derivatives,
    rotation_matrix,
    transform_point,
    transform_vector,
)

angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
coord = st.floats(-10.0, 10.0, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)


def test_zero_angles_give_identity():
    assert np.array_equal(rotation_matrix(0.0, 0.0, 0.0), np.eye(3))


def test_quarter_turn_about_z_maps_x_to_y():
    np.testing.assert_allclose(rotation_matrix(math.pi / 2, 0, 0) @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_generic_rotation_is_orthonormal():
    M = rotation_matrix(0.3, -0.2, 0.7)
    assert np.max(np.abs(M.T @ M - np.eye(3))) < 1e-14
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-14)


def test_composition_order_is_z_then_y_then_x():
    g, b, a = 0.4, -0.3, 0.9
    Rz = np.array([[math.cos(g), -math.sin(g), 0], [math.sin(g), math.cos(g), 0], [0, 0, 1]])
    Ry = np.array([[math.cos(b), 0, math.sin(b)], [0, 1, 0], [-math.sin(b), 0, math.cos(b)]])
    Rx = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
    np.testing.assert_allclose(rotation_matrix(g, b, a), Rz @ Ry @ Rx, atol=1e-15)


@pytest.mark.parametrize(
    "state, p, expected",
    [
        (RigidBodyState(), (1, 2, 3), (1, 2, 3)),
        (RigidBodyState(t=(5, 0, 0)), (1, 0, 0), (6, 0, 0)),
        (RigidBodyState(gamma=math.pi / 2, t=(0, 0, 1)), (1, 0, 0), (0, 1, 1)),
    ],
)
def test_transform_point_examples(state, p, expected):
    np.testing.assert_allclose(transform_point(state, p), expected, atol=1e-15)


@pytest.mark.parametrize(
    "state, v, expected",
    [
        (RigidBodyState(), (0, 0, 1), (0, 0, 1)),
        (RigidBodyState(t=(9, 9, 9)), (1, 0, 0), (1, 0, 0)),
        (RigidBodyState(gamma=math.pi), (1, 0, 0), (-1, 0, 0)),
    ],
)
def test_transform_vector_examples(state, v, expected):
    np.testing.assert_allclose(transform_vector(state, v), expected, atol=1e-15)


def test_state_vector_round_trip():
    st_ = RigidBodyState(0.1, -0.2, 0.3, (1.0, 2.0, 3.0))
    assert RigidBodyState.from_vector(st_.as_vector()) == st_


def test_yaw_derivative_at_zero_is_the_z_generator():
    first, _ = rotation_derivatives(0.0, 0.0, 0.0)
    np.testing.assert_allclose(first[0] @ [1, 0, 0], [0, 1, 0], atol=1e-15)


def test_second_derivatives_cover_six_distinct_pairs():
    _, second = rotation_derivatives(0.2, 0.3, 0.4)
    assert set(second) == set(SECOND_ORDER_PAIRS)


def test_mixed_partials_are_symmetric():
    _, _, d2R = batch_rotations(np.array([[0.3, -0.7, 1.1]]))
    for a in range(3):
        for b in range(3):
            assert np.array_equal(d2R[0, a, b], d2R[0, b, a])


def _fd_first(angles, h=1e-5):
    out = []
    for k in range(3):
        ap = np.array(angles, float)
        am = ap.copy()
        ap[k] += h
        am[k] -= h
        out.append((rotation_matrix(*ap) - rotation_matrix(*am)) / (2 * h))
    return np.array(out)


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def test_derivatives_match_central_differences_at_100_states():
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(100):
        angles = rng.uniform(-math.pi, math.pi, 3)
        first, second = rotation_derivatives(*angles)
        assert _rel(first, _fd_first(angles, h)) < 1e-6
        for a, b in SECOND_ORDER_PAIRS:
            ap = angles.copy()
            am = angles.copy()
            ap[b] += h
            am[b] -= h
            fd = (rotation_derivatives(*ap)[0][a] - rotation_derivatives(*am)[0][a]) / (2 * h)
            assert _rel(second[(a, b)], fd) < 1e-6


def test_batch_matches_single_evaluation():
    rng = np.random.default_rng(3)
    angles = rng.uniform(-3, 3, (5, 3))
    R, dR, _ = batch_rotations(angles)
    for k in range(5):
        np.testing.assert_allclose(R[k], rotation_matrix(*angles[k]), atol=1e-15)
        np.testing.assert_allclose(dR[k], rotation_derivatives(*angles[k])[0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle)
def test_rotation_is_orthonormal_everywhere(g, b, a):
    R = rotation_matrix(g, b, a)
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle, vec3, vec3)
def test_point_minus_origin_is_the_vector_transform(g, b, a, t, p):
    state = RigidBodyState(g, b, a, t)
    diff = transform_point(state, p) - transform_point(state, (0, 0, 0))
    np.testing.assert_allclose(diff, transform_vector(state, p), atol=1e-12)
