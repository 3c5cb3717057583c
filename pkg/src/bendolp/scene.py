"""Cell description: step labels, tool-model poses and the scene file parser.

A scene file is a JSON document that stands in for the CAD assembly. Every
robot target is a named tool model (``step_1``, ``step_2A`` ...) with a pose
in world coordinates.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry
from .errors import (
    InvariantViolation,
    MalformedLabel,
    MissingField,
    NonOrthonormal,
    SceneError,
    SceneSyntaxError,
    ZeroIndex,
)
from .geometry import Pose


class Phase(enum.IntEnum):
    # value order doubles as the within-index sort order
    Pickup = 0
    MoveOnly = 1
    BendPositionRelease = 2
    BendGraspRetrieve = 3
    Palletize = 4

    @property
    def is_bend(self) -> bool:
        return self in (Phase.BendPositionRelease, Phase.BendGraspRetrieve)


_SUFFIX = {"A": Phase.BendPositionRelease, "B": Phase.BendGraspRetrieve, "F": Phase.MoveOnly}
_LABEL_RE = re.compile(r"step_(0|[1-9][0-9]*)([ABFabf]?)")


@dataclass(frozen=True, order=True)
class StepLabel:
    index: int
    phase: Phase

    def __str__(self):
        return format_step_label(self)


def parse_step_label(name: str) -> StepLabel:
    """Parse a tool-model name.

    Bare ``step_<n>`` is a pickup when ``n == 1`` and a palletize step otherwise.

    >>> parse_step_label("step_2A")
    StepLabel(index=2, phase=<Phase.BendPositionRelease: 2>)
    """
    if not isinstance(name, str):
        raise MalformedLabel(f"tool name must be a string, got {type(name).__name__}")
    m = _LABEL_RE.fullmatch(name)
    if m is None:
        raise MalformedLabel(f"malformed tool name {name!r}")
    index = int(m.group(1))
    if index < 1:
        raise ZeroIndex(f"step index must be >= 1 in {name!r}")
    suffix = m.group(2).upper()
    if suffix:
        return StepLabel(index, _SUFFIX[suffix])
    return StepLabel(index, Phase.Pickup if index == 1 else Phase.Palletize)


def format_step_label(label: StepLabel) -> str:
    suffix = {
        Phase.BendPositionRelease: "A",
        Phase.BendGraspRetrieve: "B",
        Phase.MoveOnly: "F",
    }.get(label.phase, "")
    return f"step_{label.index}{suffix}"


@dataclass(frozen=True)
class ToolModelPose:
    label: StepLabel
    pose: Pose

    @property
    def name(self) -> str:
        return format_step_label(self.label)


@dataclass(frozen=True)
class PressBrakeSpec:
    pbh: float
    dbl: float
    nl: int
    lwa: float
    uwa: float

    @property
    def window(self) -> Tuple[float, float]:
        """Open z-interval of the real bending line's working area."""
        return (self.pbh + self.lwa, self.pbh + self.uwa)


@dataclass(frozen=True)
class ToolingStation:
    id: str
    x_min: float
    x_max: float
    punch_id: str = ""
    die_id: str = ""


@dataclass(frozen=True)
class Box:
    id: str
    min: Tuple[float, float, float]
    max: Tuple[float, float, float]


@dataclass(frozen=True)
class ProcessParams:
    approach_offset: Tuple[float, float, float] = (0.0, 0.0, 50.0)
    retreat_offset: Tuple[float, float, float] = (100.0, 0.0, 0.0)
    move_speed: float = 169.0
    press_command_port: int = 2
    gripper_port: int = 1
    press_done_port: int = 1
    press_wait: float = 2.0
    gripper_settle: float = 0.5
    pallet_increment: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    piece_count: int = 1
    poll_wait: float = 0.1  # re-check period of the press handshake retry loop

    def validate(self) -> None:
        if not self.move_speed > 0:
            raise InvariantViolation("params.move_speed must be > 0")
        for name in ("press_wait", "gripper_settle", "poll_wait"):
            if not getattr(self, name) >= 0:
                raise InvariantViolation(f"params.{name} must be >= 0")
        if self.press_command_port == self.gripper_port:
            raise InvariantViolation("params: press_command_port and gripper_port must differ")
        for name in ("press_command_port", "gripper_port", "press_done_port"):
            if getattr(self, name) < 1:
                raise InvariantViolation(f"params.{name} must be >= 1")
        if self.piece_count < 1:
            raise InvariantViolation("params.piece_count must be >= 1")


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.code}: {self.message}"


@dataclass(frozen=True)
class CellScene:
    tools: Tuple[ToolModelPose, ...]
    brake: PressBrakeSpec
    stations: Tuple[ToolingStation, ...] = ()
    robot_base: Pose = field(default_factory=Pose.identity)
    pallets: Dict[str, Pose] = field(default_factory=dict)
    collision_world: Tuple[Box, ...] = ()
    params: ProcessParams = field(default_factory=ProcessParams)
    warnings: Tuple[Diagnostic, ...] = ()

    def tool(self, name: str) -> ToolModelPose:
        label = parse_step_label(name)
        for t in self.tools:
            if t.label == label:
                return t
        raise KeyError(name)


def ordered_steps(scene) -> List[ToolModelPose]:
    """Tools in execution order: ascending index, A before B within an index."""
    tools = scene.tools if isinstance(scene, CellScene) else scene
    return sorted(tools, key=lambda t: (t.label.index, t.label.phase))


# -- parsing -------------------------------------------------------------------

_MISSING = object()


def _get(obj, key, where, default=_MISSING):
    if not isinstance(obj, dict):
        raise InvariantViolation(f"{where} must be an object")
    if key not in obj:
        if default is _MISSING:
            raise MissingField(f"{where}.{key} is required")
        return default
    return obj[key]


def _number(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvariantViolation(f"{where} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise InvariantViolation(f"{where} must be finite")
    return v


def _integer(v, where) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
        raise InvariantViolation(f"{where} must be an integer")
    return int(v)


def _vector(v, where, n=3) -> Tuple[float, ...]:
    if not isinstance(v, list) or len(v) != n:
        raise InvariantViolation(f"{where} must be a list of {n} numbers")
    return tuple(_number(x, f"{where}[{i}]") for i, x in enumerate(v))


def _string(v, where) -> str:
    if not isinstance(v, str):
        raise InvariantViolation(f"{where} must be a string")
    return v


def _pose(obj, where) -> Pose:
    position = _vector(_get(obj, "position", where), f"{where}.position")
    if "rotation" in obj:
        rows = obj["rotation"]
        if not isinstance(rows, list) or len(rows) != 3:
            raise InvariantViolation(f"{where}.rotation must be 3 rows of 3 numbers")
        rot = np.array([_vector(r, f"{where}.rotation[{i}]") for i, r in enumerate(rows)])
        try:
            rot = geometry.checked_rotation(rot)
        except NonOrthonormal as exc:
            raise NonOrthonormal(f"{where}.rotation: {exc}") from None
    elif "euler_xyz_deg" in obj:
        rot = geometry.rotation_from_euler(_vector(obj["euler_xyz_deg"], f"{where}.euler_xyz_deg"))
    else:
        raise MissingField(f"{where} needs rotation or euler_xyz_deg")
    return Pose(rot, position)


def _brake(obj) -> PressBrakeSpec:
    b = PressBrakeSpec(
        pbh=_number(_get(obj, "pbh", "brake"), "brake.pbh"),
        dbl=_number(_get(obj, "dbl", "brake"), "brake.dbl"),
        nl=_integer(_get(obj, "nl", "brake"), "brake.nl"),
        lwa=_number(_get(obj, "lwa", "brake"), "brake.lwa"),
        uwa=_number(_get(obj, "uwa", "brake"), "brake.uwa"),
    )
    if not b.dbl > 0:
        raise InvariantViolation("brake.dbl must be > 0")
    if b.nl < 0:
        raise InvariantViolation("brake.nl must be >= 0")
    if not b.lwa < b.uwa:
        raise InvariantViolation("brake.lwa must be < brake.uwa")
    if b.dbl < b.uwa - b.lwa:
        raise InvariantViolation("brake.dbl must be >= uwa - lwa (ladder lines would overlap)")
    return b


def _stations(items) -> Tuple[ToolingStation, ...]:
    if not isinstance(items, list):
        raise InvariantViolation("stations must be a list")
    out = []
    for i, s in enumerate(items):
        w = f"stations[{i}]"
        st = ToolingStation(
            id=_string(_get(s, "id", w), f"{w}.id"),
            x_min=_number(_get(s, "x_min", w), f"{w}.x_min"),
            x_max=_number(_get(s, "x_max", w), f"{w}.x_max"),
            punch_id=_string(_get(s, "punch_id", w, ""), f"{w}.punch_id"),
            die_id=_string(_get(s, "die_id", w, ""), f"{w}.die_id"),
        )
        if not st.x_min < st.x_max:
            raise InvariantViolation(f"station {st.id!r}: x_min must be < x_max")
        out.append(st)
    ids = [s.id for s in out]
    if len(set(ids)) != len(ids):
        raise InvariantViolation("station ids must be unique")
    spans = sorted(out, key=lambda s: s.x_min)
    for a, b in zip(spans, spans[1:]):
        if b.x_min < a.x_max:
            raise InvariantViolation(f"stations {a.id!r} and {b.id!r} overlap")
    return tuple(out)


def _boxes(items) -> Tuple[Box, ...]:
    if not isinstance(items, list):
        raise InvariantViolation("collision_world must be a list")
    out = []
    for i, b in enumerate(items):
        w = f"collision_world[{i}]"
        box = Box(
            id=_string(_get(b, "id", w), f"{w}.id"),
            min=_vector(_get(b, "min", w), f"{w}.min"),
            max=_vector(_get(b, "max", w), f"{w}.max"),
        )
        if not all(lo < hi for lo, hi in zip(box.min, box.max)):
            raise InvariantViolation(f"box {box.id!r}: min must be < max on every axis")
        out.append(box)
    return tuple(out)


_VECTOR_PARAMS = {"approach_offset", "retreat_offset", "pallet_increment"}
_INT_PARAMS = {"press_command_port", "gripper_port", "press_done_port", "piece_count"}


def coerce_param(name: str, value, where="params"):
    """Convert a JSON (or CLI) value to the type of ProcessParams field ``name``."""
    if name in _VECTOR_PARAMS:
        return _vector(value, f"{where}.{name}")
    if name in _INT_PARAMS:
        return _integer(value, f"{where}.{name}")
    return _number(value, f"{where}.{name}")


def parse_params(obj) -> ProcessParams:
    if not isinstance(obj, dict):
        raise InvariantViolation("params must be an object")
    known = {f.name for f in fields(ProcessParams)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise InvariantViolation(f"unknown params field(s): {', '.join(unknown)}")
    params = ProcessParams(**{k: coerce_param(k, v) for k, v in obj.items()})
    params.validate()
    return params


def _tools(items) -> Tuple[ToolModelPose, ...]:
    if not isinstance(items, list):
        raise InvariantViolation("tools must be a list")
    out = []
    for i, t in enumerate(items):
        w = f"tools[{i}]"
        label = parse_step_label(_get(t, "name", w))
        out.append(ToolModelPose(label, _pose(_get(t, "pose", w), f"{w}.pose")))
    return tuple(out)


def validate_tools(tools: Sequence[ToolModelPose]) -> List[Diagnostic]:
    """Check the label invariants of a tool set. Raises on errors, returns warnings."""
    if not tools:
        raise InvariantViolation("scene has no tools")
    seen = set()
    for t in tools:
        if t.label in seen:
            raise InvariantViolation(f"duplicate tool {t.name}")
        seen.add(t.label)
    max_index = max(t.label.index for t in tools)
    pickups = [t for t in tools if t.label.phase is Phase.Pickup]
    pallets = [t for t in tools if t.label.phase is Phase.Palletize]
    if len(pickups) != 1:
        raise InvariantViolation(f"scene needs exactly one step_1, found {len(pickups)}")
    if len(pallets) != 1:
        raise InvariantViolation(f"scene needs exactly one palletize step, found {len(pallets)}")
    for t in tools:
        if t.label.index == 1 and t.label.phase is not Phase.Pickup:
            raise InvariantViolation(f"{t.name}: index 1 is reserved for the pickup step")
        if t.label.index == max_index and t.label.phase is not Phase.Palletize:
            raise InvariantViolation(
                f"{t.name}: the highest index ({max_index}) must be the palletize step"
            )
    if max_index == 1:
        raise InvariantViolation("scene needs a palletize step after step_1")
    warnings = []
    for t in tools:
        if t.label.phase is Phase.BendGraspRetrieve:
            if StepLabel(t.label.index, Phase.BendPositionRelease) not in seen:
                raise InvariantViolation(f"{t.name} has no matching step_{t.label.index}A")
        elif t.label.phase is Phase.BendPositionRelease:
            if StepLabel(t.label.index, Phase.BendGraspRetrieve) not in seen:
                warnings.append(
                    Diagnostic(
                        "warning",
                        "MissingRegrasp",
                        f"{t.name} has no step_{t.label.index}B; re-grasp block omitted",
                    )
                )
    return warnings


def scene_from_dict(doc) -> CellScene:
    if not isinstance(doc, dict):
        raise InvariantViolation("scene document must be a JSON object")
    brake = _brake(_get(doc, "brake", "scene"))
    tools = _tools(_get(doc, "tools", "scene"))
    warnings = validate_tools(tools)
    stations = _stations(_get(doc, "stations", "scene", []))
    base_obj = _get(doc, "robot_base", "scene", None)
    if base_obj is None:
        robot_base = Pose.identity()
    else:
        robot_base = _pose(_get(base_obj, "pose", "robot_base"), "robot_base.pose")
    pallets = {}
    pallet_obj = _get(doc, "pallets", "scene", {})
    if not isinstance(pallet_obj, dict):
        raise InvariantViolation("pallets must be an object")
    for key in sorted(pallet_obj):
        if key not in ("input", "output"):
            raise InvariantViolation(f"unknown pallet {key!r}")
        pallets[key] = _pose(pallet_obj[key], f"pallets.{key}")
    world = _boxes(_get(doc, "collision_world", "scene", []))
    params = parse_params(_get(doc, "params", "scene", {}))
    return CellScene(
        tools=tools,
        brake=brake,
        stations=stations,
        robot_base=robot_base,
        pallets=pallets,
        collision_world=world,
        params=params,
        warnings=tuple(warnings),
    )


def parse_scene(text) -> CellScene:
    """Parse and validate scene-file text.

    Every failure surfaces as a SceneError subclass; tool poses are stored
    exactly as given (orthonormality repair aside).
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SceneSyntaxError(f"scene is not valid UTF-8: {exc.reason}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    except RecursionError:
        raise SceneSyntaxError("scene document nested too deeply") from None
    try:
        return scene_from_dict(doc)
    except SceneError:
        raise
    except (TypeError, ValueError, OverflowError) as exc:
        # defensive: malformed values that slipped past the field readers
        raise InvariantViolation(str(exc)) from None


def load_scene(path) -> CellScene:
    with open(path, "rb") as fh:
        return parse_scene(fh.read())
