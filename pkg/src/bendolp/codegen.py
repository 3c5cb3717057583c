"""Expand a normalized scene into a pose-register program and emit JBI text.

Register layout: step poses take ``P0001..`` in execution order; the offset
registers sit in a reserved band (approach ``P0034``, retreat ``P0035``,
pallet increment ``P0036``). Step poses past the band skip over it.

Offsets are plain Cartesian increments in the robot base frame:

* approach pose of a bend/pickup ``= p + approach - retreat`` (bend) or
  ``p + approach`` (pickup, palletize)
* retreat pose of a bend ``= p - retreat``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from . import geometry
from .bendline import NormalizedPose, normalize_scene
from .errors import InternalError
from .geometry import Cartesian
from .scene import CellScene, Phase, ProcessParams, StepLabel

APPROACH_REG = 34
RETREAT_REG = 35
INCREMENT_REG = 36
RESERVED = (APPROACH_REG, RETREAT_REG, INCREMENT_REG)
MAX_REGISTER = 9999

EULER_NOTE = "EULER XYZ DEG R=RZ*RY*RX BASE FRAME"


# -- IR ------------------------------------------------------------------------


@dataclass(frozen=True)
class PoseRegister:
    id: int
    value: Cartesian  # x, y, z mm; rx, ry, rz deg


@dataclass(frozen=True)
class LinearMove:
    reg: int
    speed: float


@dataclass(frozen=True)
class ModifyPose:
    reg: int
    op: str  # "add" | "sub"
    operand_reg: int


@dataclass(frozen=True)
class SetOutput:
    port: int
    on: bool


@dataclass(frozen=True)
class Wait:
    seconds: float


@dataclass(frozen=True)
class BranchIfInput:
    port: int
    state: bool
    label: str


@dataclass(frozen=True)
class Jump:
    label: str


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Comment:
    text: str


Instruction = Union[LinearMove, ModifyPose, SetOutput, Wait, BranchIfInput, Jump, Label, Comment]


@dataclass(frozen=True)
class ProgramIR:
    name: str
    registers: Tuple[PoseRegister, ...]
    body: Tuple[Instruction, ...]

    def register_map(self):
        return {r.id: r.value for r in self.registers}


def quantize(v: float, digits: int = 6) -> float:
    """Round to what the emitter prints, so IR and text agree exactly."""
    return float(f"{v:.{digits}f}") + 0.0


def quantize_cartesian(c) -> Cartesian:
    return tuple(quantize(v) for v in c)


def check_program(ir: ProgramIR) -> None:
    """Raise InternalError if the IR references missing registers or labels."""
    regs = set()
    for r in ir.registers:
        if r.id in regs or not 1 <= r.id <= MAX_REGISTER:
            raise InternalError(f"bad or duplicate register id {r.id}")
        regs.add(r.id)
    labels = set()
    for ins in ir.body:
        if isinstance(ins, Label):
            if ins.name in labels:
                raise InternalError(f"duplicate label *{ins.name}")
            labels.add(ins.name)
    for ins in ir.body:
        if isinstance(ins, (LinearMove, ModifyPose)):
            for reg in (ins.reg, getattr(ins, "operand_reg", ins.reg)):
                if reg not in regs:
                    raise InternalError(f"MissingRegister: P{reg:04d}")
        if isinstance(ins, (BranchIfInput, Jump)) and ins.label not in labels:
            raise InternalError(f"UnreachableLabel: *{ins.label}")


# -- block expanders -----------------------------------------------------------


def _offset(reg: int, adds=(), subs=()) -> List[Instruction]:
    return [ModifyPose(reg, "add", r) for r in adds] + [ModifyPose(reg, "sub", r) for r in subs]


def _speed(params: ProcessParams) -> float:
    return quantize(params.move_speed, 2)


def _settle(params: ProcessParams) -> Wait:
    return Wait(quantize(params.gripper_settle, 2))


def _label_suffix(m: int, piece: int) -> str:
    return f"{m}" if piece == 0 else f"{m}_{piece}"


def expand_bend_cycle(
    a: int, b: Optional[int], params: ProcessParams, m: int, piece: int = 0
) -> List[Instruction]:
    """Instructions for one bend: position, release, press stroke, re-grasp, retreat.

    ``a`` and ``b`` are the register ids holding the step_mA / step_mB poses.
    """
    v = _speed(params)
    press, grip, done = params.press_command_port, params.gripper_port, params.press_done_port
    sfx = _label_suffix(m, piece)
    lbl_a, lbl_b, lbl_c = f"STEPA{sfx}", f"STEPB{sfx}", f"STEPC{sfx}"
    out: List[Instruction] = []
    out += _offset(a, adds=[APPROACH_REG], subs=[RETREAT_REG])
    out.append(LinearMove(a, v))
    out += [ModifyPose(a, "sub", APPROACH_REG), ModifyPose(a, "add", RETREAT_REG)]
    out.append(LinearMove(a, v))
    out.append(SetOutput(press, True))
    out.append(Wait(quantize(params.press_wait, 2)))
    out.append(Comment("+++ON/OFF+++"))
    out.append(BranchIfInput(done, True, lbl_a))
    out.append(BranchIfInput(done, False, lbl_b))
    out.append(Label(lbl_a))
    out.append(SetOutput(grip, False))
    out.append(_settle(params))
    out.append(SetOutput(press, True))
    retreat_reg = a
    if b is not None:
        out.append(LinearMove(b, v))
        out.append(SetOutput(grip, True))
        out.append(_settle(params))
        retreat_reg = b
    else:
        out.append(Comment(f"WARNING STEP {m}B MISSING - NO REGRASP"))
    out.append(SetOutput(press, False))
    out.append(ModifyPose(retreat_reg, "sub", RETREAT_REG))
    out.append(LinearMove(retreat_reg, v))
    out.append(ModifyPose(retreat_reg, "add", RETREAT_REG))
    # press not done yet: poll until it is, then resume at the release block
    out.append(Jump(lbl_c))
    out.append(Label(lbl_b))
    out.append(Wait(quantize(params.poll_wait, 2)))
    out.append(BranchIfInput(done, True, lbl_a))
    out.append(BranchIfInput(done, False, lbl_b))
    out.append(Label(lbl_c))
    return out


def _stacked(reg: int, piece_index: int, params: ProcessParams, gripper_on: bool) -> List[Instruction]:
    v = _speed(params)
    out: List[Instruction] = [ModifyPose(reg, "add", INCREMENT_REG)] * piece_index
    out += [ModifyPose(reg, "add", APPROACH_REG), LinearMove(reg, v)]
    out += [ModifyPose(reg, "sub", APPROACH_REG), LinearMove(reg, v)]
    out += [SetOutput(params.gripper_port, gripper_on), _settle(params)]
    out += [ModifyPose(reg, "add", APPROACH_REG), LinearMove(reg, v)]
    out += [ModifyPose(reg, "sub", APPROACH_REG)]
    out += [ModifyPose(reg, "sub", INCREMENT_REG)] * piece_index
    return out


def expand_pickup(p: int, params: ProcessParams, piece_index: int) -> List[Instruction]:
    """Pick from the input stack; the target is ``p + piece_index * pallet_increment``."""
    return _stacked(p, piece_index, params, gripper_on=True)


def expand_move(p: int, params: ProcessParams) -> List[Instruction]:
    return [LinearMove(p, _speed(params))]


def expand_palletize(p: int, params: ProcessParams, piece_index: int) -> List[Instruction]:
    """Place on the output pallet at ``p + piece_index * pallet_increment``."""
    return _stacked(p, piece_index, params, gripper_on=False)


# -- planning ------------------------------------------------------------------


def _register_ids(count: int) -> List[int]:
    ids, n = [], 1
    while len(ids) < count:
        if n not in RESERVED:
            ids.append(n)
        n += 1
    if ids and ids[-1] > MAX_REGISTER:
        raise InternalError(f"too many step poses ({count}) for P-variable space")
    return ids


def base_frame_cartesian(npose: NormalizedPose, scene: CellScene) -> Cartesian:
    rel = geometry.relative_pose(scene.robot_base, npose.pose)
    return quantize_cartesian(geometry.to_cartesian(rel))


def plan_program(
    scene: CellScene,
    params: Optional[ProcessParams] = None,
    name: str = "BENDCELL",
    steps: Optional[Sequence[NormalizedPose]] = None,
) -> ProgramIR:
    """Build the ProgramIR following the phase dispatch of the step sequence.

    ``steps`` defaults to ``normalize_scene(scene)``; pass it to reuse an
    already-normalized list.
    """
    params = params or scene.params
    params.validate()
    if steps is None:
        steps = normalize_scene(scene)
    ids = _register_ids(len(steps))
    reg_of = {s.label: rid for s, rid in zip(steps, ids)}
    registers = [PoseRegister(rid, base_frame_cartesian(s, scene)) for s, rid in zip(steps, ids)]
    registers += [
        PoseRegister(APPROACH_REG, quantize_cartesian(tuple(params.approach_offset) + (0.0, 0.0, 0.0))),
        PoseRegister(RETREAT_REG, quantize_cartesian(tuple(params.retreat_offset) + (0.0, 0.0, 0.0))),
        PoseRegister(INCREMENT_REG, quantize_cartesian(tuple(params.pallet_increment) + (0.0, 0.0, 0.0))),
    ]
    registers.sort(key=lambda r: r.id)

    body: List[Instruction] = []
    has_b = {s.label.index for s in steps if s.label.phase is Phase.BendGraspRetrieve}
    for piece in range(params.piece_count):
        if params.piece_count > 1:
            body.append(Comment(f"----- PIECE {piece + 1} -----"))
        for s in steps:
            label = s.label
            if label.phase is Phase.BendGraspRetrieve:
                continue  # emitted together with its A pose
            body.append(Comment(f"***** STEP {label.index} *****"))
            reg = reg_of[label]
            if label.phase is Phase.Pickup:
                body += expand_pickup(reg, params, piece)
            elif label.phase is Phase.MoveOnly:
                body += expand_move(reg, params)
            elif label.phase is Phase.BendPositionRelease:
                b = None
                if label.index in has_b:
                    b = reg_of[StepLabel(label.index, Phase.BendGraspRetrieve)]
                body += expand_bend_cycle(reg, b, params, label.index, piece)
            elif label.phase is Phase.Palletize:
                body += expand_palletize(reg, params, piece)
    ir = ProgramIR(name=name, registers=tuple(registers), body=tuple(body))
    check_program(ir)
    return ir


# -- emission ------------------------------------------------------------------


def _onoff(flag: bool) -> str:
    return "ON" if flag else "OFF"


def format_instruction(ins: Instruction) -> str:
    if isinstance(ins, LinearMove):
        return f"MOVL P{ins.reg:04d} V={ins.speed:.2f}"
    if isinstance(ins, ModifyPose):
        return f"{ins.op.upper()} P{ins.reg:04d} P{ins.operand_reg:04d}"
    if isinstance(ins, SetOutput):
        return f"DOUT OT#({ins.port}) {_onoff(ins.on)}"
    if isinstance(ins, Wait):
        return f"TIMER T={ins.seconds:.2f}"
    if isinstance(ins, BranchIfInput):
        return f"JUMP *{ins.label} IF IN#({ins.port})={_onoff(ins.state)}"
    if isinstance(ins, Jump):
        return f"JUMP *{ins.label}"
    if isinstance(ins, Label):
        return f"*{ins.name}"
    if isinstance(ins, Comment):
        return f"'{ins.text}"
    raise InternalError(f"cannot emit {ins!r}")


def format_cartesian(c) -> str:
    return ",".join(f"{quantize(v):.6f}" for v in c)


def emit_program(ir: ProgramIR) -> str:
    """Serialize to JBI text. Byte-deterministic, LF line endings, no date line."""
    lines = ["/JOB", f"//NAME {ir.name}", "//POS", f"///NPOS 0,0,0,{len(ir.registers)},0,0"]
    lines += ["///TOOL 0", "///POSTYPE BASE", "///RECTAN"]
    lines += [f"C{r.id:05d}={format_cartesian(r.value)}" for r in ir.registers]
    lines += ["//INST", "///ATTR SC,RW", "///GROUP1 RB1", f"'{EULER_NOTE}", "NOP"]
    lines += [format_instruction(ins) for ins in ir.body]
    lines.append("END")
    return "\n".join(lines) + "\n"


def census(ir: ProgramIR, params: ProcessParams) -> dict:
    """Static count of press pulses (rising edges) and gripper-off commands.

    Outputs start low; the level is tracked in body order, which matches
    execution order because retry loops never touch outputs.
    """
    level = {}
    pulses = gripper_off = 0
    for ins in ir.body:
        if isinstance(ins, SetOutput):
            if ins.port == params.press_command_port and ins.on and not level.get(ins.port, False):
                pulses += 1
            if ins.port == params.gripper_port and not ins.on:
                gripper_off += 1
            level[ins.port] = ins.on
    return {"press_pulses": pulses, "gripper_off": gripper_off}
