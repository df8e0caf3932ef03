"""Scene model, scene files and the canonical CCMA scenes.

Scene files are YAML documents::

    format: 1
    name: my-scene
    description: free text
    bodies:
      - {name: ee, euler: [0.0, 0.0, 0.0], t: [0.0, 0.0, 0.5]}
    joints:
      - {kind: revolute, body_i: a, body_j: b,
         p_i: [...], p_j: [...], v_i: [...], v_j: [...]}
    bases:
      - {body: base0, scheme: reduced, initial: [x, y, theta]}
    end_effector: {body: ee, mask: [true, true, true, true, false, false]}

``euler`` is ``[gamma, beta, alpha]`` (yaw, pitch, roll; R = Rz Ry Rx). All
joint points and axes are in the local frame of the body they belong to.
Per-kind joint fields:

* revolute, universal: ``p_i p_j v_i v_j``
* spherical: ``p_i p_j``
* fixed: ``p_i p_j a_i a_j b_i b_j``
* prismatic: ``p_i p_j v_i v_j w_i w_j`` (v is the slide axis)

Every base body receives a planar constraint plus x/y and heading motor
constraints driven by controls ``u[3k], u[3k+1], u[3k+2]``. The heading
constraint holds when the body yaw equals ``-theta``. For reduced bases
theta is frozen at its initial value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .constraints import (
    WORLD,
    X_AXIS,
    Z_AXIS,
    ConstraintBlock,
    ConstraintSystem,
    Kind,
)
from .rigidbody import RigidBodyState, rotation_matrix

FORMAT_VERSION = 1
AXIS_TOL = 1e-6
TASK_COORDS = ("x", "y", "z", "gamma", "beta", "alpha")

JOINT_FIELDS = {
    Kind.REVOLUTE: ("p_i", "p_j", "v_i", "v_j"),
    Kind.SPHERICAL: ("p_i", "p_j"),
    Kind.FIXED: ("p_i", "p_j", "a_i", "a_j", "b_i", "b_j"),
    Kind.UNIVERSAL: ("p_i", "p_j", "v_i", "v_j"),
    Kind.PRISMATIC: ("p_i", "p_j", "v_i", "v_j", "w_i", "w_j"),
}

CANONICAL_NAMES = (
    "ccma-4dof-reduced",
    "ccma-4dof-complete",
    "ccma-6dof-sym",
    "ccma-6dof-asym",
    "ccma-6dof-6agents",
)


class Scheme(str, enum.Enum):
    REDUCED = "reduced"
    COMPLETE = "complete"


class SceneError(ValueError):
    """Scene parse or validation failure.

    ``code`` is one of ParseError, SchemaError, UnsupportedVersion,
    DuplicateBody, DanglingBodyRef, SelfJoint, UnknownJointKind,
    NonUnitAxis, NoMobileBase, DuplicateBase, EmptyTaskMask,
    UnknownScene, InfeasibleScene.
    """

    def __init__(self, code: str, message: str, line: int | None = None, where: str | None = None, details=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if where:
            loc.append(where)
        prefix = f"{code}" + (f" ({', '.join(loc)})" if loc else "")
        super().__init__(f"{prefix}: {message}")
        self.code = code
        self.line = line
        self.where = where
        self.details = details or {}


@dataclass(frozen=True)
class Body:
    name: str
    state: RigidBodyState


@dataclass(frozen=True)
class Joint:
    kind: Kind
    body_i: str
    body_j: str
    anchors: tuple
    axes: tuple = ()
    name: str = ""


@dataclass(frozen=True)
class MobileBase:
    body: str
    scheme: Scheme
    initial: tuple[float, float, float]


@dataclass(frozen=True)
class SceneModel:
    name: str
    bodies: tuple[Body, ...]
    joints: tuple[Joint, ...]
    bases: tuple[MobileBase, ...]
    end_effector: str
    task_mask: tuple[bool, ...]
    description: str = ""

    @cached_property
    def body_index(self) -> dict[str, int]:
        return {b.name: i for i, b in enumerate(self.bodies)}

    @property
    def n_b(self) -> int:
        return len(self.bodies)

    @property
    def n_m(self) -> int:
        return len(self.bases)

    @property
    def n_s(self) -> int:
        return 6 * self.n_b

    @property
    def n_u(self) -> int:
        return 3 * self.n_m

    @property
    def ee_index(self) -> int:
        return self.body_index[self.end_effector]

    @cached_property
    def frozen_slots(self) -> tuple[int, ...]:
        return tuple(3 * k + 2 for k, b in enumerate(self.bases) if b.scheme is Scheme.REDUCED)

    @cached_property
    def free_slots(self) -> np.ndarray:
        frozen = set(self.frozen_slots)
        return np.array([i for i in range(self.n_u) if i not in frozen], dtype=int)

    @property
    def n_free(self) -> int:
        return len(self.free_slots)

    @cached_property
    def mask_array(self) -> np.ndarray:
        return np.array(self.task_mask, dtype=bool)

    @cached_property
    def blocks(self) -> tuple[ConstraintBlock, ...]:
        idx = self.body_index
        out = []
        offset = 0

        def push(block):
            nonlocal offset
            out.append(block)
            offset += block.rows

        for k, base in enumerate(self.bases):
            b = idx[base.body]
            push(ConstraintBlock(Kind.PLANAR_BASE, b, WORLD, axes=(Z_AXIS,), row_offset=offset, name=f"planar:{base.body}"))
            push(ConstraintBlock(Kind.MOTOR_XY, b, WORLD, control_slots=(3 * k, 3 * k + 1), row_offset=offset, name=f"motor_xy:{base.body}"))
            push(ConstraintBlock(Kind.MOTOR_Z, b, WORLD, axes=(X_AXIS,), control_slots=(3 * k + 2,), row_offset=offset, name=f"motor_z:{base.body}"))
        for n, j in enumerate(self.joints):
            label = j.name or f"{j.kind.value}:{j.body_i}-{j.body_j}"
            push(ConstraintBlock(j.kind, idx[j.body_i], idx[j.body_j], j.anchors, j.axes, row_offset=offset, name=label))
        return tuple(out)

    @cached_property
    def system(self) -> ConstraintSystem:
        return ConstraintSystem(self.blocks, self.n_b, self.n_u)

    @property
    def n_rows(self) -> int:
        return self.system.n_rows

    def initial_state(self) -> np.ndarray:
        return np.concatenate([b.state.as_vector() for b in self.bodies])

    def initial_controls(self) -> np.ndarray:
        return np.array([v for b in self.bases for v in b.initial], dtype=float)

    def reference_pose(self) -> np.ndarray:
        """End-effector pose (x, y, z, gamma, beta, alpha) stored in the scene."""
        st = self.bodies[self.ee_index].state
        return np.array([*st.t, st.gamma, st.beta, st.alpha])

    def base_indices(self) -> np.ndarray:
        return np.array([self.body_index[b.body] for b in self.bases], dtype=int)


# -- parsing ----------------------------------------------------------------------


class _LineLoader(yaml.SafeLoader):
    """Safe loader that records the 1-based source line of every mapping."""


def _construct_mapping(loader, node):
    mapping = loader.construct_mapping(node, deep=True)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _vec3(raw, where, line):
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise SceneError("SchemaError", f"expected a list of 3 numbers, got {raw!r}", line, where)
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SceneError("SchemaError", f"expected finite numbers, got {raw!r}", line, where)
        out.append(float(v))
    return tuple(out)


def _unit(raw, where, line):
    v = _vec3(raw, where, line)
    n = math.sqrt(sum(c * c for c in v))
    if abs(n - 1.0) > AXIS_TOL:
        raise SceneError("NonUnitAxis", f"axis {v} has norm {n:.9g}", line, where)
    if abs(n - 1.0) > 1e-12:
        v = tuple(c / n for c in v)
    return v


def _require(entry, key, where):
    if not isinstance(entry, dict):
        raise SceneError("SchemaError", f"expected a mapping, got {entry!r}", None, where)
    if key not in entry:
        raise SceneError("SchemaError", f"missing field '{key}'", entry.get("__line__"), where)
    return entry[key]


def load_scene(text: str) -> SceneModel:
    """Parse and validate scene-file text."""
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise SceneError("ParseError", str(getattr(exc, "problem", exc)), line) from exc
    if not isinstance(doc, dict):
        raise SceneError("ParseError", "scene document must be a mapping", 1)
    version = _require(doc, "format", "format")
    if version != FORMAT_VERSION:
        raise SceneError("UnsupportedVersion", f"format {version!r} is not supported (expected {FORMAT_VERSION})", doc["__line__"], "format")

    raw_bodies = _require(doc, "bodies", "bodies")
    if not isinstance(raw_bodies, list) or not raw_bodies:
        raise SceneError("SchemaError", "bodies must be a non-empty list", doc["__line__"], "bodies")
    bodies = []
    seen = set()
    for n, rb in enumerate(raw_bodies):
        where = f"bodies[{n}]"
        name = str(_require(rb, "name", where))
        line = rb.get("__line__")
        if name in seen:
            raise SceneError("DuplicateBody", f"body name '{name}' repeated", line, where)
        seen.add(name)
        g, b, a = _vec3(_require(rb, "euler", where), where + ".euler", line)
        t = _vec3(_require(rb, "t", where), where + ".t", line)
        bodies.append(Body(name, RigidBodyState(g, b, a, t)))

    joints = []
    for n, rj in enumerate(doc.get("joints") or []):
        where = f"joints[{n}]"
        line = rj.get("__line__") if isinstance(rj, dict) else None
        kind_raw = _require(rj, "kind", where)
        try:
            kind = Kind(kind_raw)
        except ValueError:
            kind = None
        if kind not in JOINT_FIELDS:
            raise SceneError("UnknownJointKind", f"unknown joint kind {kind_raw!r}", line, where)
        bi = str(_require(rj, "body_i", where))
        bj = str(_require(rj, "body_j", where))
        for ref in (bi, bj):
            if ref not in seen:
                raise SceneError("DanglingBodyRef", f"joint references unknown body '{ref}'", line, where)
        if bi == bj:
            raise SceneError("SelfJoint", f"joint connects body '{bi}' to itself", line, where)
        fields = JOINT_FIELDS[kind]
        anchors = tuple(_vec3(_require(rj, f, where), f"{where}.{f}", line) for f in fields[:2])
        axes = tuple(_unit(_require(rj, f, where), f"{where}.{f}", line) for f in fields[2:])
        joints.append(Joint(kind, bi, bj, anchors, axes, str(rj.get("name", ""))))

    raw_bases = doc.get("bases") or []
    if not raw_bases:
        raise SceneError("NoMobileBase", "a scene needs at least one mobile base", doc["__line__"], "bases")
    bases = []
    used = set()
    for n, rb in enumerate(raw_bases):
        where = f"bases[{n}]"
        line = rb.get("__line__") if isinstance(rb, dict) else None
        body = str(_require(rb, "body", where))
        if body not in seen:
            raise SceneError("DanglingBodyRef", f"base references unknown body '{body}'", line, where)
        if body in used:
            raise SceneError("DuplicateBase", f"body '{body}' is used by more than one base", line, where)
        used.add(body)
        try:
            scheme = Scheme(_require(rb, "scheme", where))
        except ValueError:
            raise SceneError("SchemaError", f"unknown scheme {rb['scheme']!r}", line, where) from None
        bases.append(MobileBase(body, scheme, _vec3(_require(rb, "initial", where), where + ".initial", line)))

    ee = _require(doc, "end_effector", "end_effector")
    line = ee.get("__line__") if isinstance(ee, dict) else None
    ee_body = str(_require(ee, "body", "end_effector"))
    if ee_body not in seen:
        raise SceneError("DanglingBodyRef", f"end effector references unknown body '{ee_body}'", line, "end_effector")
    mask = _require(ee, "mask", "end_effector")
    if not isinstance(mask, list) or len(mask) != 6 or not all(isinstance(m, bool) for m in mask):
        raise SceneError("SchemaError", "mask must be a list of 6 booleans", line, "end_effector.mask")
    if not any(mask):
        raise SceneError("EmptyTaskMask", "mask selects no task coordinate", line, "end_effector.mask")

    return SceneModel(
        name=str(doc.get("name", "")),
        bodies=tuple(bodies),
        joints=tuple(joints),
        bases=tuple(bases),
        end_effector=ee_body,
        task_mask=tuple(mask),
        description=str(doc.get("description", "")),
    )


def _flow(seq):
    return _FlowList(float(v) for v in seq)


class _FlowList(list):
    pass


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(_FlowList, lambda d, data: d.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=True))


def dump_scene(model: SceneModel) -> str:
    """Serialize a model; ``load_scene(dump_scene(m)) == m``."""
    doc = {
        "format": FORMAT_VERSION,
        "name": model.name,
        "description": model.description,
        "bodies": [
            {"name": b.name, "euler": _flow(b.state.angles), "t": _flow(b.state.t)} for b in model.bodies
        ],
        "joints": [],
        "bases": [{"body": b.body, "scheme": b.scheme.value, "initial": _flow(b.initial)} for b in model.bases],
        "end_effector": {"body": model.end_effector, "mask": list(model.task_mask)},
    }
    for j in model.joints:
        entry = {"kind": j.kind.value, "body_i": j.body_i, "body_j": j.body_j}
        if j.name:
            entry["name"] = j.name
        for key, vec in zip(JOINT_FIELDS[j.kind], j.anchors + j.axes):
            entry[key] = _flow(vec)
        doc["joints"].append(entry)
    header = "".join(f"# {line}\n" for line in model.description.splitlines()) if model.description else ""
    return header + yaml.dump(doc, Dumper=_Dumper, sort_keys=False, width=120)


def load_scene_file(path) -> SceneModel:
    return load_scene(Path(path).read_text(encoding="utf-8"))


def shipped_scene_text(name: str) -> str:
    if name not in CANONICAL_NAMES:
        raise SceneError("UnknownScene", f"no shipped scene named {name!r}")
    return resources.files("ccma").joinpath("scenes", f"{name}.yaml").read_text(encoding="utf-8")


def resolve_scene(spec: str) -> SceneModel:
    """Load a canonical scene by name or a scene file by path."""
    if spec in CANONICAL_NAMES:
        return load_scene(shipped_scene_text(spec))
    path = Path(spec)
    if not path.exists():
        raise SceneError("UnknownScene", f"{spec!r} is neither a canonical scene nor a file")
    return load_scene_file(path)


# -- canonical scenes --------------------------------------------------------------


class _Builder:
    """Places bodies and joints in world coordinates at a reference pose."""

    def __init__(self):
        self.bodies: list[Body] = []
        self.joints: list[Joint] = []
        self.bases: list[MobileBase] = []
        self._pose = {}

    def body(self, name, t, euler=(0.0, 0.0, 0.0)):
        t = tuple(float(v) for v in t)
        euler = tuple(float(v) for v in euler)
        self.bodies.append(Body(name, RigidBodyState(*euler, t)))
        self._pose[name] = (rotation_matrix(*euler), np.array(t))
        return name

    def _local_point(self, body, p):
        R, t = self._pose[body]
        return tuple(float(v) for v in R.T @ (np.asarray(p, float) - t))

    def _local_axis(self, body, v):
        R, _ = self._pose[body]
        v = np.asarray(v, float)
        v = R.T @ (v / np.linalg.norm(v))
        return tuple(float(c) for c in v)

    def joint(self, kind, bi, bj, point, *axes, name=""):
        anchors = (self._local_point(bi, point), self._local_point(bj, point))
        local_axes = []
        if kind is Kind.UNIVERSAL:
            # axes[0] belongs to body i, axes[1] to body j
            local_axes = [self._local_axis(bi, axes[0]), self._local_axis(bj, axes[1])]
        else:
            for ax in axes:
                local_axes += [self._local_axis(bi, ax), self._local_axis(bj, ax)]
        self.joints.append(Joint(kind, bi, bj, anchors, tuple(local_axes), name))

    def base(self, name, xy, scheme, theta=0.0):
        self.body(name, (xy[0], xy[1], 0.0), (-theta, 0.0, 0.0))
        self.bases.append(MobileBase(name, Scheme(scheme), (float(xy[0]), float(xy[1]), float(theta))))
        return name


def _horizontal(angle):
    return np.array([math.cos(angle), math.sin(angle), 0.0])


_EZ = np.array([0.0, 0.0, 1.0])


def _two_link_leg(bld, tag, ee, A, approach, *, lower, upper, tilt, scheme, wrist):
    """Base -> lower link -> upper link -> end effector, closed on point A.

    The leg lives in the vertical plane through A along the horizontal
    direction ``approach`` (pointing from the base toward A). The lower
    link leans toward A by ``tilt`` from vertical and the knee axis is
    normal to the leg plane.

    Reduced legs turn on a hub revolute at the base; complete legs are
    bolted to the base and get that yaw freedom back at the knee, which
    becomes a universal joint (vertical on the lower link). ``wrist`` is
    'universal' (knee normal on the upper link, an axis aimed at the base
    hub on the end effector) or 'spherical'. Aiming the wrist axis down
    at the hub lets the leg resist end-effector tilt with a lever arm of
    the full platform height. Returns the base position.
    """
    e = _horizontal(approach)
    n = np.cross(_EZ, e)
    knee_z = lower * math.cos(tilt)
    rise = A[2] - knee_z
    if abs(rise) >= upper:
        raise ValueError(f"leg {tag} cannot reach height {A[2]!r}")
    reach = math.sqrt(upper * upper - rise * rise) + lower * math.sin(tilt)
    B = np.array([A[0], A[1], 0.0]) - reach * e
    K = B + lower * (math.sin(tilt) * e + math.cos(tilt) * _EZ)
    base = bld.base(f"base{tag}", B[:2], scheme)
    low = bld.body(f"lower{tag}", (B + K) / 2)
    up = bld.body(f"upper{tag}", (K + A) / 2)
    if scheme == "reduced":
        bld.joint(Kind.REVOLUTE, base, low, B, _EZ, name=f"hub{tag}")
        bld.joint(Kind.REVOLUTE, low, up, K, n, name=f"knee{tag}")
    else:
        bld.joint(Kind.FIXED, base, low, B, _EZ, e, name=f"bolt{tag}")
        bld.joint(Kind.UNIVERSAL, low, up, K, _EZ, n, name=f"knee{tag}")
    if wrist == "universal":
        bld.joint(Kind.UNIVERSAL, up, ee, A, n, B - A, name=f"wrist{tag}")
    else:
        bld.joint(Kind.SPHERICAL, up, ee, A, name=f"wrist{tag}")
    return B


def _three_link_leg(bld, tag, ee, A, approach, *, lower, middle, upper, tilt, bend):
    """Base -> lower -> middle -> upper -> end effector, all revolute.

    Vertical hub axis, two knee axes normal to the leg plane and a wrist
    axis in the leg plane aimed at the base hub, so the leg spans every
    end-effector direction once its base translates. ``bend`` is the lean
    of the middle link from vertical.
    """
    e = _horizontal(approach)
    n = np.cross(_EZ, e)
    rise = A[2] - lower * math.cos(tilt) - middle * math.cos(bend)
    if abs(rise) >= upper:
        raise ValueError(f"leg {tag} cannot reach height {A[2]!r}")
    reach = math.sqrt(upper * upper - rise * rise) + lower * math.sin(tilt) + middle * math.sin(bend)
    B = np.array([A[0], A[1], 0.0]) - reach * e
    K1 = B + lower * (math.sin(tilt) * e + math.cos(tilt) * _EZ)
    K2 = K1 + middle * (math.sin(bend) * e + math.cos(bend) * _EZ)
    base = bld.base(f"base{tag}", B[:2], "reduced")
    low = bld.body(f"lower{tag}", (B + K1) / 2)
    mid = bld.body(f"middle{tag}", (K1 + K2) / 2)
    up = bld.body(f"upper{tag}", (K2 + A) / 2)
    bld.joint(Kind.REVOLUTE, base, low, B, _EZ, name=f"hub{tag}")
    bld.joint(Kind.REVOLUTE, low, mid, K1, n, name=f"knee{tag}")
    bld.joint(Kind.REVOLUTE, mid, up, K2, n, name=f"elbow{tag}")
    bld.joint(Kind.REVOLUTE, up, ee, A, B - A, name=f"wrist{tag}")
    return B


def _attachment(center, radius, phi):
    return np.asarray(center, dtype=float) + radius * _horizontal(phi)


LEG_ANGLES = tuple(math.radians(90.0 + 120.0 * k) for k in range(3))

# 4-DOF geometry (metres / radians): bases on a 0.45 m circle, triangle
# end effector of circumradius 0.12 m, 0.35 m links. The small lean of the
# lower link puts the upper link near 31 deg pitch at the reference, midway
# between the stretched and horizontal singular poses over a +-0.1 m z range.
G4 = dict(base_radius=0.45, ee_radius=0.12, lower=0.35, upper=0.35, tilt=math.radians(5.0))
# leg 3 of the complete-scheme scene
G4_LEG3 = dict(lower=0.30, upper=0.40)


def _ccma_4dof_height():
    lo, up, tilt = G4["lower"], G4["upper"], G4["tilt"]
    dh = G4["base_radius"] - G4["ee_radius"] - lo * math.sin(tilt)
    return lo * math.cos(tilt) + math.sqrt(up * up - dh * dh)


def _ccma_4dof(scheme):
    bld = _Builder()
    center = np.array([0.0, 0.0, _ccma_4dof_height()])
    ee = bld.body("ee", center)
    for k, phi in enumerate(LEG_ANGLES):
        lengths = dict(lower=G4["lower"], upper=G4["upper"])
        if scheme == "complete" and k == 2:
            lengths = dict(G4_LEG3)
        _two_link_leg(
            bld,
            str(k),
            ee,
            _attachment(center, G4["ee_radius"], phi),
            phi + math.pi,
            tilt=G4["tilt"],
            scheme=scheme,
            wrist="universal",
            **lengths,
        )
    return bld


# 6-DOF, three agents
G6 = dict(ee_radius=0.12, height=0.55, lower=0.25, middle=0.25, upper=0.30, tilt=math.radians(10.0), bend=math.radians(40.0))
G6_ASYM_LEG2 = dict(lower=0.28, middle=0.22, upper=0.33)
G6_ASYM_LEG3 = dict(lower=0.40, upper=0.35, tilt=math.radians(20.0))


def _ccma_6dof_three(asym):
    bld = _Builder()
    center = np.array([0.0, 0.0, G6["height"]])
    ee = bld.body("ee", center)
    for k, phi in enumerate(LEG_ANGLES):
        A = _attachment(center, G6["ee_radius"], phi)
        if asym and k == 2:
            _two_link_leg(bld, str(k), ee, A, phi + math.pi, scheme="reduced", wrist="universal", **G6_ASYM_LEG3)
            continue
        lengths = dict(lower=G6["lower"], middle=G6["middle"], upper=G6["upper"])
        if asym and k == 1:
            lengths = dict(G6_ASYM_LEG2)
        _three_link_leg(bld, str(k), ee, A, phi + math.pi, tilt=G6["tilt"], bend=G6["bend"], **lengths)
    return bld


# 6-DOF, six agents: each leg acts as a strut from knee to wrist. Legs
# approach their attachment point with alternating tangential offsets
# (purely radial legs would leave the yaw unconstrained); the proportions
# keep the strut set well conditioned for base moves beyond 50 mm.
G6X = dict(ee_radius=0.16, height=0.6, lower=0.35, upper=0.35, tilt=math.radians(15.0), offset=0.9)


def _ccma_6dof_six():
    bld = _Builder()
    center = np.array([0.0, 0.0, G6X["height"]])
    ee = bld.body("ee", center)
    for k in range(6):
        phi = math.radians(90.0 + 60.0 * k)
        offset = G6X["offset"] if k % 2 == 0 else -G6X["offset"]
        _two_link_leg(
            bld,
            str(k),
            ee,
            _attachment(center, G6X["ee_radius"], phi),
            phi + math.pi + offset,
            lower=G6X["lower"],
            upper=G6X["upper"],
            tilt=G6X["tilt"],
            scheme="reduced",
            wrist="spherical",
        )
    return bld


def build_canonical(name: str) -> SceneModel:
    """Construct one of the shipped CCMA scenes at its reference pose."""
    if name == "ccma-4dof-reduced":
        bld = _ccma_4dof("reduced")
        mask = (True, True, True, True, False, False)
        desc = "4-DOF CCMA: three identical two-link legs with universal wrists, reduced actuation (hub revolute at every base)."
    elif name == "ccma-4dof-complete":
        bld = _ccma_4dof("complete")
        mask = (True, True, True, True, False, False)
        desc = (
            "4-DOF CCMA: two-link legs with universal knees and wrists, complete actuation (lower links bolted to the bases).\n"
            "Leg 3 link lengths (0.30 m / 0.40 m) are invented design values."
        )
    elif name == "ccma-6dof-sym":
        bld = _ccma_6dof_three(asym=False)
        mask = (True,) * 6
        desc = "6-DOF CCMA, symmetric: three identical three-link revolute legs, reduced actuation."
    elif name == "ccma-6dof-asym":
        bld = _ccma_6dof_three(asym=True)
        mask = (True,) * 6
        desc = (
            "6-DOF CCMA, asymmetric: legs 1 and 2 are three-link revolute legs with different link lengths;\n"
            "leg 3 is a two-link leg with a universal wrist. Leg parameters are invented design values."
        )
    elif name == "ccma-6dof-6agents":
        bld = _ccma_6dof_six()
        mask = (True,) * 6
        desc = "6-DOF CCMA with six mobile agents: two-link legs with spherical wrists, reduced actuation."
    else:
        raise SceneError("UnknownScene", f"no canonical scene named {name!r}")
    return SceneModel(
        name=name,
        bodies=tuple(bld.bodies),
        joints=tuple(bld.joints),
        bases=tuple(bld.bases),
        end_effector="ee",
        task_mask=mask,
        description=desc,
    )


def write_canonical_scenes(directory) -> list[Path]:
    """Regenerate the shipped scene files from :func:`build_canonical`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in CANONICAL_NAMES:
        path = directory / f"{name}.yaml"
        path.write_text(dump_scene(build_canonical(name)), encoding="utf-8")
        paths.append(path)
    return paths


# -- initial assembly --------------------------------------------------------------


def initial_assembly(model: SceneModel, cfg=None, energy_tol: float = 1e-18):
    """Reference (s0, u0): controls from the base entries, state polished by one solve."""
    from .forward_solver import FkConfig, SolverBreakdown, solve_fk

    cfg = cfg or FkConfig()
    s = model.initial_state()
    u = model.initial_controls()
    try:
        rep = solve_fk(model, s, u, cfg)
    except SolverBreakdown as exc:
        rep = exc.report
        raise SceneError(
            "InfeasibleScene",
            f"polish solve broke down: {exc}",
            details={"energy": rep.energy if rep else None, "block_residuals": rep.block_residuals if rep else {}},
        ) from exc
    if not rep.converged or rep.energy >= energy_tol:
        raise SceneError(
            "InfeasibleScene",
            f"scene does not assemble: E={rep.energy:.3e} after {rep.iters} iterations",
            details={"energy": rep.energy, "block_residuals": rep.block_residuals},
        )
    return rep.s_hat, u
