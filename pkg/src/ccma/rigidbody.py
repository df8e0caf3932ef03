"""Euler-angle rigid-body poses and rotation derivatives.

A body pose is ``(gamma, beta, alpha, x, y, z)``. The rotation is the
product ``Rz(gamma) @ Ry(beta) @ Rx(alpha)``, i.e. gamma is the yaw about
world z, beta the pitch about y and alpha the roll about x. Angles are
never wrapped; they are plain coordinates for the solvers.

Gimbal lock (beta = +-pi/2) is not special-cased.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# index pairs of the six distinct second derivatives, in the order returned
# by rotation_derivatives
SECOND_ORDER_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class RigidBodyState:
    gamma: float = 0.0
    beta: float = 0.0
    alpha: float = 0.0
    t: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def from_vector(cls, s) -> "RigidBodyState":
        s = np.asarray(s, dtype=float)
        return cls(float(s[0]), float(s[1]), float(s[2]), tuple(float(v) for v in s[3:6]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.gamma, self.beta, self.alpha, *self.t], dtype=float)

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.gamma, self.beta, self.alpha)

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.gamma, self.beta, self.alpha)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_matrix(gamma: float, beta: float, alpha: float) -> np.ndarray:
    return _rz(gamma) @ _ry(beta) @ _rx(alpha)


def transform_point(state: RigidBodyState, p_local) -> np.ndarray:
    """World coordinates of a point given in the body frame."""
    return state.rotation() @ np.asarray(p_local, dtype=float) + np.asarray(state.t)


def transform_vector(state: RigidBodyState, v_local) -> np.ndarray:
    """World direction of a free vector given in the body frame."""
    return state.rotation() @ np.asarray(v_local, dtype=float)


def rotation_derivatives(gamma: float, beta: float, alpha: float):
    """First and second derivatives of the rotation w.r.t. (gamma, beta, alpha).

    Returns ``(first, second)`` where ``first`` has shape (3, 3, 3) with
    ``first[a]`` = dR/d(angle a), and ``second`` is a dict keyed by the
    angle-index pairs in ``SECOND_ORDER_PAIRS`` (6 distinct matrices; the
    mixed partials are symmetric so ``second[(1, 0)]`` is not stored).
    """
    _, dR, d2R = batch_rotations(np.array([[gamma, beta, alpha]], dtype=float))
    first = dR[0]
    second = {pair: d2R[0, pair[0], pair[1]] for pair in SECOND_ORDER_PAIRS}
    return first, second


def _elementary(c, s, axis):
    # stacks of elementary rotations and their first two derivatives for
    # angle arrays; returns arrays of shape (n, 3, 3)
    n = c.shape[0]
    z = np.zeros(n)
    o = np.ones(n)
    if axis == "z":
        R = [[c, -s, z], [s, c, z], [z, z, o]]
        D = [[-s, -c, z], [c, -s, z], [z, z, z]]
        DD = [[-c, s, z], [-s, -c, z], [z, z, z]]
    elif axis == "y":
        R = [[c, z, s], [z, o, z], [-s, z, c]]
        D = [[-s, z, c], [z, z, z], [-c, z, -s]]
        DD = [[-c, z, -s], [z, z, z], [s, z, -c]]
    else:
        R = [[o, z, z], [z, c, -s], [z, s, c]]
        D = [[z, z, z], [z, -s, -c], [z, c, -s]]
        DD = [[z, z, z], [z, -c, s], [z, -s, -c]]
    out = []
    for m in (R, D, DD):
        out.append(np.moveaxis(np.array(m), 2, 0))
    return out


def batch_rotations(angles: np.ndarray):
    """Rotations and derivatives for a stack of (gamma, beta, alpha) rows.

    Returns ``R`` (n, 3, 3), ``dR`` (n, 3, 3, 3) indexed ``[body, angle]`` and
    ``d2R`` (n, 3, 3, 3, 3) indexed ``[body, angle_a, angle_b]``.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    c = np.cos(angles)
    s = np.sin(angles)
    Z = _elementary(c[:, 0], s[:, 0], "z")
    Y = _elementary(c[:, 1], s[:, 1], "y")
    X = _elementary(c[:, 2], s[:, 2], "x")
    factors = (Z, Y, X)

    def prod(orders):
        a, b, cc = (factors[k][orders[k]] for k in range(3))
        return a @ b @ cc

    n = angles.shape[0]
    R = prod((0, 0, 0))
    dR = np.empty((n, 3, 3, 3))
    d2R = np.empty((n, 3, 3, 3, 3))
    for a in range(3):
        orders = [0, 0, 0]
        orders[a] = 1
        dR[:, a] = prod(orders)
    for a in range(3):
        for b in range(a, 3):
            orders = [0, 0, 0]
            orders[a] += 1
            orders[b] += 1
            m = prod(orders)
            d2R[:, a, b] = m
            d2R[:, b, a] = m
    return R, dR, d2R
