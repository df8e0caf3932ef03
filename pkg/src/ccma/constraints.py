"""Kinematic constraint blocks and the assembled constraint vector C(s, u).

Every block is built from a handful of row primitives acting on world
points ``p = R p_local + t`` and world vectors ``v = R v_local``:

========== ===================================== ====
primitive  value                                 rows
========== ===================================== ====
pointdiff  p_j - p_i                             3
vecdiff    v_j - v_i                             3
vecdot     v_i . v_j                             1
lineoff    (p_j - p_i) . n_i                     1
height     z of the body origin                  1
vecworld   R v_local - target                    3
motorxy    (x - u[a], y - u[b])                  2
motorz     R Rz(theta) v_local - x_g             3
========== ===================================== ====

:class:`ConstraintSystem` evaluates each primitive for all blocks at once
and scatters the results into dense arrays. Differences are always
``quantity_j - quantity_i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .rigidbody import RigidBodyState, batch_rotations, transform_point, transform_vector

WORLD = -1
Z_AXIS = (0.0, 0.0, 1.0)
X_AXIS = (1.0, 0.0, 0.0)


class Kind(str, enum.Enum):
    REVOLUTE = "revolute"
    SPHERICAL = "spherical"
    FIXED = "fixed"
    UNIVERSAL = "universal"
    PRISMATIC = "prismatic"
    PLANAR_BASE = "planar_base"
    MOTOR_XY = "motor_xy"
    MOTOR_Z = "motor_z"


ROW_COUNTS = {
    Kind.REVOLUTE: 6,
    Kind.SPHERICAL: 3,
    Kind.FIXED: 9,
    Kind.UNIVERSAL: 4,
    Kind.PRISMATIC: 8,
    Kind.PLANAR_BASE: 4,
    Kind.MOTOR_XY: 2,
    Kind.MOTOR_Z: 3,
}

# number of local axes each kind carries (anchors are always (p_i, p_j)
# for two-body kinds and empty for base kinds)
AXIS_COUNTS = {
    Kind.REVOLUTE: 2,
    Kind.SPHERICAL: 0,
    Kind.FIXED: 4,
    Kind.UNIVERSAL: 2,
    Kind.PRISMATIC: 4,
    Kind.PLANAR_BASE: 1,
    Kind.MOTOR_XY: 0,
    Kind.MOTOR_Z: 1,
}

CONTROL_SLOT_COUNTS = {Kind.MOTOR_XY: 2, Kind.MOTOR_Z: 1}

BASE_KINDS = (Kind.PLANAR_BASE, Kind.MOTOR_XY, Kind.MOTOR_Z)


class DimensionError(ValueError):
    """State or control vector does not match the model."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


@dataclass(frozen=True)
class ConstraintBlock:
    """One joint or actuator constraint.

    ``anchors`` holds ``(p_i, p_j)`` for two-body kinds. ``axes`` holds
    ``(v_i, v_j)`` for revolute/universal, ``(a_i, a_j, b_i, b_j)`` for fixed
    and prismatic (slide axis first), the base normal for planar_base and the
    in-plane reference vector for motor_z. Base kinds use ``body_j = WORLD``.
    """

    kind: Kind
    body_i: int
    body_j: int = WORLD
    anchors: tuple = ()
    axes: tuple = ()
    control_slots: tuple[int, ...] = ()
    row_offset: int = 0
    name: str = ""

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        n_slots = CONTROL_SLOT_COUNTS.get(kind, 0)
        if len(self.control_slots) != n_slots:
            raise ValueError(f"{kind.value} block needs {n_slots} control slots, got {len(self.control_slots)}")
        if len(self.axes) != AXIS_COUNTS[kind]:
            raise ValueError(f"{kind.value} block needs {AXIS_COUNTS[kind]} axes, got {len(self.axes)}")
        n_anchor = 0 if kind in BASE_KINDS else 2
        if len(self.anchors) != n_anchor:
            raise ValueError(f"{kind.value} block needs {n_anchor} anchors, got {len(self.anchors)}")
        if (kind in BASE_KINDS) != (self.body_j == WORLD):
            raise ValueError(f"{kind.value} block has wrong body_j {self.body_j}")

    @property
    def rows(self) -> int:
        return ROW_COUNTS[self.kind]

    @property
    def bodies(self) -> tuple[int, ...]:
        return (self.body_i,) if self.body_j == WORLD else (self.body_i, self.body_j)

    @property
    def label(self) -> str:
        return self.name or f"{self.kind.value}[{self.body_i},{self.body_j}]"


# -- direct per-block evaluation ------------------------------------------------
# Straightforward formulas on RigidBodyState objects. They are slow and are
# used for single-block queries and as an oracle for ConstraintSystem.


def eval_revolute(state_i, state_j, p_i, p_j, v_i, v_j) -> np.ndarray:
    dp = transform_point(state_j, p_j) - transform_point(state_i, p_i)
    dv = transform_vector(state_j, v_j) - transform_vector(state_i, v_i)
    return np.concatenate([dp, dv])


def eval_spherical(state_i, state_j, p_i, p_j) -> np.ndarray:
    return transform_point(state_j, p_j) - transform_point(state_i, p_i)


def eval_fixed(state_i, state_j, p_i, p_j, a_i, a_j, b_i, b_j) -> np.ndarray:
    return np.concatenate(
        [
            eval_spherical(state_i, state_j, p_i, p_j),
            transform_vector(state_j, a_j) - transform_vector(state_i, a_i),
            transform_vector(state_j, b_j) - transform_vector(state_i, b_i),
        ]
    )


def eval_universal(state_i, state_j, p_i, p_j, v_i, v_j) -> np.ndarray:
    dot = transform_vector(state_i, v_i) @ transform_vector(state_j, v_j)
    return np.concatenate([eval_spherical(state_i, state_j, p_i, p_j), [dot]])


def eval_prismatic(state_i, state_j, p_i, p_j, v_i, v_j, w_i, w_j) -> np.ndarray:
    d = eval_spherical(state_i, state_j, p_i, p_j)
    n_i = np.cross(np.asarray(v_i, float), np.asarray(w_i, float))
    return np.concatenate(
        [
            transform_vector(state_j, v_j) - transform_vector(state_i, v_i),
            transform_vector(state_j, w_j) - transform_vector(state_i, w_i),
            [d @ transform_vector(state_i, w_i), d @ transform_vector(state_i, n_i)],
        ]
    )


def eval_planar_base(state_k, normal=Z_AXIS) -> np.ndarray:
    vn = transform_vector(state_k, normal)
    return np.concatenate([[state_k.t[2]], vn - np.array(Z_AXIS)])


def eval_motor_xy(state_k, u, slots) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.array([state_k.t[0] - u[slots[0]], state_k.t[1] - u[slots[1]]])


def eval_motor_z(state_k, u, slot, vp=X_AXIS) -> np.ndarray:
    theta = float(np.asarray(u, dtype=float)[slot])
    c, s = np.cos(theta), np.sin(theta)
    w = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ np.asarray(vp, dtype=float)
    return transform_vector(state_k, w) - np.array(X_AXIS)


def body_state(s, index: int) -> RigidBodyState:
    return RigidBodyState.from_vector(np.asarray(s)[6 * index : 6 * index + 6])


def evaluate_block(block: ConstraintBlock, s, u) -> np.ndarray:
    """Evaluate one block directly from the stacked state ``s``."""
    si = body_state(s, block.body_i)
    k = block.kind
    if k is Kind.PLANAR_BASE:
        return eval_planar_base(si, block.axes[0])
    if k is Kind.MOTOR_XY:
        return eval_motor_xy(si, u, block.control_slots)
    if k is Kind.MOTOR_Z:
        return eval_motor_z(si, u, block.control_slots[0], block.axes[0])
    sj = body_state(s, block.body_j)
    fn = {
        Kind.REVOLUTE: eval_revolute,
        Kind.SPHERICAL: eval_spherical,
        Kind.FIXED: eval_fixed,
        Kind.UNIVERSAL: eval_universal,
        Kind.PRISMATIC: eval_prismatic,
    }[k]
    return fn(si, sj, *block.anchors, *block.axes)


# -- vectorized row primitives -----------------------------------------------------

_I3 = np.eye(3)


class _Kin:
    """Per-body rotations, derivatives and translations for one state."""

    def __init__(self, s, order):
        s = s.reshape(-1, 6)
        self.t = s[:, 3:]
        R, dR, d2R = batch_rotations(s[:, :3])
        self.R = R
        self.dR = dR
        self.d2R = d2R if order >= 2 else None

    def world(self, b, w, point, order):
        """Value (K,3), Jacobian (K,3,6) and angle Hessian (K,3,3,3)."""
        val = np.einsum("kij,kj->ki", self.R[b], w)
        if point:
            val = val + self.t[b]
        if order == 0:
            return val, None, None
        J = np.zeros((len(b), 3, 6))
        J[:, :, :3] = np.einsum("kaij,kj->kia", self.dR[b], w)
        if point:
            J[:, :, 3:] = _I3
        H = None
        if order >= 2:
            H = np.einsum("kabij,kj->kiab", self.d2R[b], w)
        return val, J, H


def _embed_angle_hessian(H, out, lo):
    # angle-only second derivatives live in the first three columns of a body
    out[:, :, lo : lo + 3, lo : lo + 3] += H


class _Group:
    """A batch of identical row primitives across many blocks."""

    n_rows = 0
    two_body = True
    uses_u = False

    def __init__(self, items):
        # items: list of dicts with keys rows, bi, bj, vectors, slots
        self.rows = np.array([it["rows"] for it in items], dtype=int)
        self.bi = np.array([it["bi"] for it in items], dtype=int)
        self.bj = np.array([it.get("bj", WORLD) for it in items], dtype=int)
        self.vecs = [np.array([it["vectors"][m] for it in items], dtype=float) for m in range(len(items[0]["vectors"]))]
        self.slots = np.array([it.get("slots", ()) for it in items], dtype=int).reshape(len(items), -1)
        bodies = [self.bi, self.bj] if self.two_body else [self.bi]
        self.cols = np.concatenate([6 * b[:, None] + np.arange(6) for b in bodies], axis=1)

    @property
    def n_cols(self):
        return 12 if self.two_body else 6

    def compute(self, kin, u, order):
        raise NotImplementedError


class _PointDiff(_Group):
    n_rows = 3

    def compute(self, kin, u, order):
        pi, Ji, Hi = kin.world(self.bi, self.vecs[0], True, order)
        pj, Jj, Hj = kin.world(self.bj, self.vecs[1], True, order)
        return _diff(pi, Ji, Hi, pj, Jj, Hj, order)


class _VecDiff(_Group):
    n_rows = 3

    def compute(self, kin, u, order):
        vi, Ji, Hi = kin.world(self.bi, self.vecs[0], False, order)
        vj, Jj, Hj = kin.world(self.bj, self.vecs[1], False, order)
        return _diff(vi, Ji, Hi, vj, Jj, Hj, order)


def _diff(qi, Ji, Hi, qj, Jj, Hj, order):
    val = qj - qi
    if order == 0:
        return val, None, None, None, None
    J = np.concatenate([-Ji, Jj], axis=2)
    H = None
    if order >= 2:
        H = np.zeros((len(val), 3, 12, 12))
        _embed_angle_hessian(-Hi, H, 0)
        _embed_angle_hessian(Hj, H, 6)
    return val, J, None, H, None


class _VecDot(_Group):
    n_rows = 1

    def compute(self, kin, u, order):
        vi, Ji, Hi = kin.world(self.bi, self.vecs[0], False, order)
        vj, Jj, Hj = kin.world(self.bj, self.vecs[1], False, order)
        val = np.sum(vi * vj, axis=1)[:, None]
        if order == 0:
            return val, None, None, None, None
        J = np.concatenate([np.einsum("ki,kia->ka", vj, Ji), np.einsum("ki,kia->ka", vi, Jj)], axis=1)[:, None, :]
        H = None
        if order >= 2:
            K = len(val)
            H = np.zeros((K, 1, 12, 12))
            H[:, 0, :3, :3] = np.einsum("ki,kiab->kab", vj, Hi)
            H[:, 0, 6:9, 6:9] = np.einsum("ki,kiab->kab", vi, Hj)
            cross = np.einsum("kia,kib->kab", Ji, Jj)
            H[:, 0, :6, 6:] = cross
            H[:, 0, 6:, :6] = np.transpose(cross, (0, 2, 1))
        return val, J, None, H, None


class _LineOffset(_Group):
    """(p_j - p_i) . n_i with n_i a vector fixed in body i."""

    n_rows = 1

    def compute(self, kin, u, order):
        pi, Jpi, Hpi = kin.world(self.bi, self.vecs[0], True, order)
        pj, Jpj, Hpj = kin.world(self.bj, self.vecs[1], True, order)
        n, Jn, Hn = kin.world(self.bi, self.vecs[2], False, order)
        d = pj - pi
        val = np.sum(d * n, axis=1)[:, None]
        if order == 0:
            return val, None, None, None, None
        Ji = -np.einsum("ki,kia->ka", n, Jpi) + np.einsum("ki,kia->ka", d, Jn)
        Jj = np.einsum("ki,kia->ka", n, Jpj)
        J = np.concatenate([Ji, Jj], axis=1)[:, None, :]
        H = None
        if order >= 2:
            K = len(val)
            H = np.zeros((K, 1, 12, 12))
            mix = np.einsum("kia,kib->kab", Jpi, Jn)
            H[:, 0, :6, :6] = -mix - np.transpose(mix, (0, 2, 1))
            H[:, 0, :3, :3] += -np.einsum("ki,kiab->kab", n, Hpi) + np.einsum("ki,kiab->kab", d, Hn)
            H[:, 0, 6:9, 6:9] = np.einsum("ki,kiab->kab", n, Hpj)
            cross = np.einsum("kia,kib->kab", Jn, Jpj)
            H[:, 0, :6, 6:] = cross
            H[:, 0, 6:, :6] = np.transpose(cross, (0, 2, 1))
        return val, J, None, H, None


class _Height(_Group):
    n_rows = 1
    two_body = False

    def compute(self, kin, u, order):
        val = kin.t[self.bi, 2][:, None]
        if order == 0:
            return val, None, None, None, None
        J = np.zeros((len(val), 1, 6))
        J[:, 0, 5] = 1.0
        H = np.zeros((len(val), 1, 6, 6)) if order >= 2 else None
        return val, J, None, H, None


class _VecWorld(_Group):
    n_rows = 3
    two_body = False

    def compute(self, kin, u, order):
        v, J, Hv = kin.world(self.bi, self.vecs[0], False, order)
        val = v - self.vecs[1]
        if order == 0:
            return val, None, None, None, None
        H = None
        if order >= 2:
            H = np.zeros((len(val), 3, 6, 6))
            _embed_angle_hessian(Hv, H, 0)
        return val, J, None, H, None


class _MotorXY(_Group):
    n_rows = 2
    two_body = False
    uses_u = True

    def compute(self, kin, u, order):
        val = kin.t[self.bi, :2] - u[self.slots]
        if order == 0:
            return val, None, None, None, None
        K = len(val)
        J = np.zeros((K, 2, 6))
        J[:, 0, 3] = 1.0
        J[:, 1, 4] = 1.0
        Ju = np.broadcast_to(-np.eye(2), (K, 2, 2)).copy()
        H = Hsu = None
        if order >= 2:
            H = np.zeros((K, 2, 6, 6))
            Hsu = np.zeros((K, 2, 6, 2))
        return val, J, Ju, H, Hsu


class _MotorZ(_Group):
    n_rows = 3
    two_body = False
    uses_u = True

    def compute(self, kin, u, order):
        theta = u[self.slots[:, 0]]
        c, s = np.cos(theta), np.sin(theta)
        vp = self.vecs[0]
        # Rz(theta) vp and its theta-derivative
        w = np.stack([c * vp[:, 0] - s * vp[:, 1], s * vp[:, 0] + c * vp[:, 1], vp[:, 2]], axis=1)
        dw = np.stack([-s * vp[:, 0] - c * vp[:, 1], c * vp[:, 0] - s * vp[:, 1], np.zeros_like(c)], axis=1)
        b = self.bi
        val = np.einsum("kij,kj->ki", kin.R[b], w) - np.array(X_AXIS)
        if order == 0:
            return val, None, None, None, None
        K = len(val)
        J = np.zeros((K, 3, 6))
        J[:, :, :3] = np.einsum("kaij,kj->kia", kin.dR[b], w)
        Ju = np.einsum("kij,kj->ki", kin.R[b], dw)[:, :, None]
        H = Hsu = None
        if order >= 2:
            H = np.zeros((K, 3, 6, 6))
            H[:, :, :3, :3] = np.einsum("kabij,kj->kiab", kin.d2R[b], w)
            Hsu = np.zeros((K, 3, 6, 1))
            Hsu[:, :, :3, 0] = np.einsum("kaij,kj->kia", kin.dR[b], dw)
        return val, J, Ju, H, Hsu


def _decompose(block: ConstraintBlock):
    """Split a block into (primitive class, item) pairs in row order."""
    k = block.kind
    i, j = block.body_i, block.body_j
    off = block.row_offset
    out = []

    def add(cls, vectors, slots=()):
        n = cls.n_rows
        start = off + sum(c.n_rows for c, _ in out)
        out.append((cls, {"rows": list(range(start, start + n)), "bi": i, "bj": j, "vectors": vectors, "slots": slots}))

    if k is Kind.PLANAR_BASE:
        add(_Height, [])
        add(_VecWorld, [block.axes[0], Z_AXIS])
        return out
    if k is Kind.MOTOR_XY:
        add(_MotorXY, [], block.control_slots)
        return out
    if k is Kind.MOTOR_Z:
        add(_MotorZ, [block.axes[0]], block.control_slots)
        return out
    p_i, p_j = block.anchors
    if k is Kind.SPHERICAL:
        add(_PointDiff, [p_i, p_j])
    elif k is Kind.REVOLUTE:
        add(_PointDiff, [p_i, p_j])
        add(_VecDiff, list(block.axes))
    elif k is Kind.FIXED:
        a_i, a_j, b_i, b_j = block.axes
        add(_PointDiff, [p_i, p_j])
        add(_VecDiff, [a_i, a_j])
        add(_VecDiff, [b_i, b_j])
    elif k is Kind.UNIVERSAL:
        add(_PointDiff, [p_i, p_j])
        add(_VecDot, list(block.axes))
    elif k is Kind.PRISMATIC:
        v_i, v_j, w_i, w_j = block.axes
        n_i = tuple(np.cross(v_i, w_i))
        add(_VecDiff, [v_i, v_j])
        add(_VecDiff, [w_i, w_j])
        add(_LineOffset, [p_i, p_j, w_i])
        add(_LineOffset, [p_i, p_j, n_i])
    return out


@dataclass
class Derivatives:
    """Constraint values and first derivatives at one (s, u).

    ``contract(w)`` returns ``(sum_r w_r d2C_r/ds2, sum_r w_r d2C_r/dsdu)``;
    it is only available when the derivatives were taken with order 2.
    """

    C: np.ndarray
    Js: np.ndarray | None = None
    Ju: np.ndarray | None = None
    n_s: int = 0
    n_u: int = 0
    _contract: object = None
    _with_c: tuple | None = None

    def contract(self, weights):
        if self._contract is None:
            raise ValueError("second derivatives were not requested (order < 2)")
        if weights is self.C and self._with_c is not None:
            return self._with_c
        return self._contract(np.asarray(weights, dtype=float))


def _contract_groups(second, n_s, n_u):
    def contract(weights):
        Hss = np.zeros((n_s, n_s))
        Hsu = np.zeros((n_s, n_u))
        for group, H, Hu in second:
            w = weights[group.rows]
            Wk = np.einsum("kr,krab->kab", w, H)
            np.add.at(Hss, (group.cols[:, :, None], group.cols[:, None, :]), Wk)
            if Hu is not None:
                Wu = np.einsum("kr,krab->kab", w, Hu)
                np.add.at(Hsu, (group.cols[:, :, None], group.slots[:, None, :]), Wu)
        return Hss, Hsu

    return contract


_PRIMITIVE_CODES = {
    "_PointDiff": 0,
    "_VecDiff": 1,
    "_VecDot": 2,
    "_LineOffset": 3,
    "_Height": 4,
    "_VecWorld": 5,
    "_MotorXY": 6,
    "_MotorZ": 7,
}

try:
    from . import _kernels
except ImportError:  # numba missing: numpy route only
    _kernels = None


class ConstraintSystem:
    """All blocks of a model compiled into row primitives.

    ``backend="compiled"`` (default when numba is importable) evaluates
    everything in one compiled pass; ``backend="numpy"`` uses the
    vectorized per-primitive route. Both give the same numbers to
    rounding.
    """

    def __init__(self, blocks, n_bodies: int, n_controls: int, backend: str | None = None):
        self.blocks = tuple(blocks)
        self.n_bodies = n_bodies
        self.n_s = 6 * n_bodies
        self.n_u = n_controls
        self.n_rows = sum(b.rows for b in self.blocks)
        for b in self.blocks:
            for body in b.bodies:
                if not 0 <= body < n_bodies:
                    raise DimensionError(f"block {b.label} references body {body} outside 0..{n_bodies - 1}", b)
            for slot in b.control_slots:
                if not 0 <= slot < n_controls:
                    raise DimensionError(f"block {b.label} references control slot {slot} outside 0..{n_controls - 1}", b)
        if backend is None:
            backend = "compiled" if _kernels is not None else "numpy"
        if backend not in ("compiled", "numpy"):
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "compiled" and _kernels is None:
            raise ImportError("the compiled backend needs numba")
        self.backend = backend
        grouped: dict[type, list] = {}
        items_in_order = []
        for b in self.blocks:
            for cls, item in _decompose(b):
                grouped.setdefault(cls, []).append(item)
                items_in_order.append((cls, item))
        self.groups = [cls(items) for cls, items in grouped.items()]
        self._table = self._pack(items_in_order)
        # row -> block lookup for diagnostics
        self.block_slices = [slice(b.row_offset, b.row_offset + b.rows) for b in self.blocks]

    @staticmethod
    def _pack(items):
        n = len(items)
        ptype = np.empty(n, dtype=np.int64)
        prow = np.empty(n, dtype=np.int64)
        pbi = np.empty(n, dtype=np.int64)
        pbj = np.empty(n, dtype=np.int64)
        pvec = np.zeros((n, 3, 3))
        pslot = np.zeros((n, 2), dtype=np.int64)
        for k, (cls, it) in enumerate(items):
            ptype[k] = _PRIMITIVE_CODES[cls.__name__]
            prow[k] = it["rows"][0]
            pbi[k] = it["bi"]
            pbj[k] = it.get("bj", WORLD)
            for m, v in enumerate(it["vectors"]):
                pvec[k, m] = v
            for m, sl in enumerate(it.get("slots", ())):
                pslot[k, m] = sl
        return ptype, prow, pbi, pbj, pvec, pslot

    def _check(self, s, u):
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        if s.shape != (self.n_s,):
            culprit = next((b for b in self.blocks if max(b.bodies) >= s.size // 6), None)
            who = f"block {culprit.label}" if culprit is not None else "state vector"
            raise DimensionError(f"state has shape {s.shape}, expected ({self.n_s},); offending: {who}", culprit)
        if u.shape != (self.n_u,):
            culprit = next((b for b in self.blocks if b.control_slots and max(b.control_slots) >= u.size), None)
            who = f"block {culprit.label}" if culprit is not None else "control vector"
            raise DimensionError(f"control has shape {u.shape}, expected ({self.n_u},); offending: {who}", culprit)
        return np.ascontiguousarray(s), np.ascontiguousarray(u)

    def _run(self, s, u, order, weights=None):
        C = np.empty(self.n_rows)
        Js = np.zeros((self.n_rows, self.n_s)) if order >= 1 else np.empty((0, 0))
        Ju = np.zeros((self.n_rows, self.n_u)) if order >= 1 else np.empty((0, 0))
        Hss = np.zeros((self.n_s, self.n_s)) if order >= 2 else np.empty((0, 0))
        Hsu = np.zeros((self.n_s, self.n_u)) if order >= 2 else np.empty((0, 0))
        from_c = weights is None
        w = np.empty(0) if from_c else weights
        _kernels.assemble(s, u, self.n_bodies, *self._table, order, w, from_c, C, Js, Ju, Hss, Hsu)
        return C, Js, Ju, Hss, Hsu

    def evaluate(self, s, u) -> np.ndarray:
        s, u = self._check(s, u)
        if self.backend == "compiled":
            return self._run(s, u, 0)[0]
        kin = _Kin(s, 0)
        C = np.empty(self.n_rows)
        for g in self.groups:
            val = g.compute(kin, u, 0)[0]
            C[g.rows] = val
        return C

    def derivatives(self, s, u, order: int = 1) -> Derivatives:
        s, u = self._check(s, u)
        if self.backend == "compiled":
            C, Js, Ju, Hss, Hsu = self._run(s, u, order)
            d = Derivatives(C, Js, Ju, self.n_s, self.n_u)
            if order >= 2:
                d._with_c = (Hss, Hsu)
                d._contract = lambda w: self._run(s, u, 2, w)[3:]
            return d
        kin = _Kin(s, order)
        C = np.empty(self.n_rows)
        Js = np.zeros((self.n_rows, self.n_s))
        Ju = np.zeros((self.n_rows, self.n_u))
        second = []
        for g in self.groups:
            val, J, Jul, H, Hu = g.compute(kin, u, order)
            C[g.rows] = val
            Js[g.rows[:, :, None], g.cols[:, None, :]] = J
            if Jul is not None:
                Ju[g.rows[:, :, None], g.slots[:, None, :]] = Jul
            if order >= 2:
                second.append((g, H, Hu))
        d = Derivatives(C, Js, Ju, self.n_s, self.n_u)
        if order >= 2:
            d._contract = _contract_groups(second, self.n_s, self.n_u)
        return d

    def second_derivative_tensors(self, s, u):
        """Dense d2C/ds2 (rows, n_s, n_s) and d2C/dsdu (rows, n_s, n_u).

        Always built from the numpy primitives, so it doubles as an
        independent check on the compiled contraction.
        """
        s, u = self._check(s, u)
        kin = _Kin(s, 2)
        Tss = np.zeros((self.n_rows, self.n_s, self.n_s))
        Tsu = np.zeros((self.n_rows, self.n_s, self.n_u))
        for g in self.groups:
            _, _, _, H, Hu = g.compute(kin, u, 2)
            for r in range(g.rows.shape[1]):
                np.add.at(Tss, (g.rows[:, r, None, None], g.cols[:, :, None], g.cols[:, None, :]), H[:, r])
                if Hu is not None:
                    np.add.at(Tsu, (g.rows[:, r, None, None], g.cols[:, :, None], g.slots[:, None, :]), Hu[:, r])
        return Tss, Tsu

    def block_residuals(self, C) -> dict[str, float]:
        """Infinity norm of each block's rows, keyed by block label."""
        return {b.label: float(np.max(np.abs(C[sl]))) for b, sl in zip(self.blocks, self.block_slices)}
