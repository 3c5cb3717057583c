"""Parse JBI job text and interpret it against a press-brake plant model.

The interpreter is a deterministic, time-driven state machine. Pose registers
hold integer micro-units (1e-6 mm / 1e-6 deg) so that ``ADD``/``SUB`` pairs
restore a register exactly. ``ADD``/``SUB`` act elementwise on
(x, y, z, rx, ry, rz), like controller P-variable arithmetic; angle addition
is *not* rotation composition.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .codegen import (
    BranchIfInput,
    Comment,
    Jump,
    Label,
    LinearMove,
    ModifyPose,
    PoseRegister,
    ProgramIR,
    SetOutput,
    Wait,
)
from .errors import (
    InvalidSpeed,
    ProgramSyntaxError,
    StepBudgetExceeded,
    UndefinedLabel,
    UndefinedRegister,
)

SCALE = 1_000_000
DEFAULT_MAX_STEPS = 10**6


# -- parsing -------------------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_NAME = r"[A-Za-z0-9_]+"
_RE = {
    "pos": re.compile(rf"C(\d{{5}})=({_NUM}(?:,{_NUM}){{5}})"),
    "movl": re.compile(rf"MOVL P(\d{{4}}) V=({_NUM})"),
    "mod": re.compile(r"(ADD|SUB) P(\d{4}) P(\d{4})"),
    "dout": re.compile(r"DOUT OT#\((\d+)\) (ON|OFF)"),
    "timer": re.compile(rf"TIMER T=({_NUM})"),
    "branch": re.compile(rf"JUMP \*({_NAME}) IF IN#\((\d+)\)=(ON|OFF)"),
    "jump": re.compile(rf"JUMP \*({_NAME})"),
    "label": re.compile(rf"\*({_NAME})"),
    "banner": re.compile(r"\*{5} .* \*{5}"),
}


def _parse_instruction(line: str, lineno: int):
    if line.startswith("'"):
        return Comment(line[1:])
    if _RE["banner"].fullmatch(line):
        return Comment(line)
    m = _RE["movl"].fullmatch(line)
    if m:
        return LinearMove(int(m.group(1)), float(m.group(2)))
    m = _RE["mod"].fullmatch(line)
    if m:
        return ModifyPose(int(m.group(2)), m.group(1).lower(), int(m.group(3)))
    m = _RE["dout"].fullmatch(line)
    if m:
        return SetOutput(int(m.group(1)), m.group(2) == "ON")
    m = _RE["timer"].fullmatch(line)
    if m:
        return Wait(float(m.group(1)))
    m = _RE["branch"].fullmatch(line)
    if m:
        return BranchIfInput(int(m.group(2)), m.group(3) == "ON", m.group(1))
    m = _RE["jump"].fullmatch(line)
    if m:
        return Jump(m.group(1))
    m = _RE["label"].fullmatch(line)
    if m:
        return Label(m.group(1))
    raise ProgramSyntaxError(f"unknown instruction {line!r}", lineno)


def parse_program(text: str) -> ProgramIR:
    """Inverse of :func:`codegen.emit_program` on its image.

    Raises ProgramSyntaxError, UndefinedRegister or UndefinedLabel with the
    offending line number.
    """
    lines = text.splitlines()
    name = None
    registers: Dict[int, Tuple[float, ...]] = {}
    body: List = []
    body_lines: List[int] = []
    section = "start"
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if section == "start":
            if line != "/JOB":
                raise ProgramSyntaxError("job must start with /JOB", lineno)
            section = "job"
        elif section == "job":
            if line.startswith("//NAME "):
                name = line[len("//NAME "):].strip()
            elif line == "//POS":
                section = "pos"
            else:
                raise ProgramSyntaxError(f"expected //NAME or //POS, got {line!r}", lineno)
        elif section == "pos":
            if line == "//INST":
                section = "inst"
            elif line.startswith("///"):
                continue
            else:
                m = _RE["pos"].fullmatch(line)
                if not m:
                    raise ProgramSyntaxError(f"bad //POS record {line!r}", lineno)
                rid = int(m.group(1))
                if rid in registers:
                    raise ProgramSyntaxError(f"register C{rid:05d} declared twice", lineno)
                registers[rid] = tuple(float(v) + 0.0 for v in m.group(2).split(","))
        elif section == "inst":
            if line.startswith("///") or line.startswith("'"):
                continue  # attributes and header comments
            if line != "NOP":
                raise ProgramSyntaxError(f"expected NOP, got {line!r}", lineno)
            section = "body"
        elif section == "body":
            if line == "END":
                section = "end"
                continue
            body.append(_parse_instruction(line, lineno))
            body_lines.append(lineno)
        else:
            raise ProgramSyntaxError(f"content after END: {line!r}", lineno)
    if section != "end":
        raise ProgramSyntaxError(f"unexpected end of job (in {section} section)", len(lines))
    if name is None:
        raise ProgramSyntaxError("missing //NAME", 1)

    labels = {}
    for ins, lineno in zip(body, body_lines):
        if isinstance(ins, Label):
            if ins.name in labels:
                raise ProgramSyntaxError(f"label *{ins.name} defined twice", lineno)
            labels[ins.name] = lineno
    for ins, lineno in zip(body, body_lines):
        if isinstance(ins, (LinearMove, ModifyPose)):
            regs = (ins.reg,) if isinstance(ins, LinearMove) else (ins.reg, ins.operand_reg)
            for reg in regs:
                if reg not in registers:
                    raise UndefinedRegister(f"P{reg:04d} is not declared in //POS", lineno)
        elif isinstance(ins, (BranchIfInput, Jump)) and ins.label not in labels:
            raise UndefinedLabel(f"*{ins.label} is not defined", lineno)
    regs = tuple(PoseRegister(rid, registers[rid]) for rid in sorted(registers))
    return ProgramIR(name=name, registers=regs, body=tuple(body))


# -- plant ---------------------------------------------------------------------


class PressState(str, enum.Enum):
    Open = "Open"
    Closing = "Closing"
    Formed = "Formed"
    Opening = "Opening"


@dataclass(frozen=True)
class PlantModel:
    """Press-brake timing. Delays are desk-scale defaults, not machine data."""

    pinch_delay: float = 1.0  # command edge -> punch holds the sheet (done on)
    form_delay: float = 1.5  # minimum dwell in Formed before the ram can open
    open_delay: float = 1.0  # ram travel back to open
    done_port: int = 1
    command_port: int = 2


@dataclass(frozen=True)
class PlantState:
    press_state: PressState = PressState.Open
    since: float = 0.0
    command: bool = False
    fall_time: float = 0.0
    pending: bool = False  # rising edge latched while opening

    @property
    def done(self) -> bool:
        return self.press_state is PressState.Formed


def plant_advance(model: PlantModel, st: PlantState, t: float):
    """Advance the plant to time ``t``; returns (state, [(time, new PressState)])."""
    changes = []
    while True:
        s = st.press_state
        if s is PressState.Closing:
            t_next = st.since + model.pinch_delay
            if t_next > t:
                break
            st = replace(st, press_state=PressState.Formed, since=t_next)
        elif s is PressState.Formed:
            if st.command:
                break
            t_next = max(st.since + model.form_delay, st.fall_time)
            if t_next > t:
                break
            st = replace(st, press_state=PressState.Opening, since=t_next)
        elif s is PressState.Opening:
            t_next = st.since + model.open_delay
            if t_next > t:
                break
            if st.pending and st.command:
                st = replace(st, press_state=PressState.Closing, since=t_next, pending=False)
            else:
                st = replace(st, press_state=PressState.Open, since=t_next, pending=False)
        else:
            break
        changes.append((t_next, st.press_state))
    return st, changes


def plant_command(model: PlantModel, st: PlantState, t: float, level: bool) -> PlantState:
    """Apply a command level at ``t`` (plant already advanced to ``t``)."""
    if level == st.command:
        return st
    if level:
        if st.press_state is PressState.Open:
            return replace(st, command=True, press_state=PressState.Closing, since=t)
        if st.press_state is PressState.Opening:
            return replace(st, command=True, pending=True)
        return replace(st, command=True)
    if st.press_state is PressState.Closing:
        return replace(st, command=False, press_state=PressState.Opening, since=t)
    return replace(st, command=False, fall_time=t, pending=False)


# -- interpreter ---------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # MoveStart | MoveEnd | OutputSet | InputChange | TimerWait | Branch | Halt
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"t": self.time, "kind": self.kind, **self.payload}


@dataclass(frozen=True)
class VmState:
    pc: int
    registers: Dict[int, Tuple[int, ...]]  # micro-units
    outputs: Dict[int, bool]
    inputs: Dict[int, bool]
    clock: float
    plant: PlantState
    tcp: Optional[Tuple[float, ...]] = None
    halted: bool = False
    steps: int = 0


@dataclass
class ExecutionTrace:
    events: List[Event]
    tcp_waypoints: List[Tuple[float, Tuple[float, ...]]]
    start_pose: Optional[Tuple[float, ...]]
    final_state: Optional[VmState] = None
    error: Optional[str] = None

    @property
    def final_clock(self) -> float:
        return self.final_state.clock if self.final_state else 0.0

    def moves(self):
        """(start_time, end_time, from, to, speed) per executed linear move."""
        out, start = [], None
        for ev in self.events:
            if ev.kind == "MoveStart":
                start = ev
            elif ev.kind == "MoveEnd":
                out.append((start.time, ev.time, start.payload["from"], ev.payload["pose"], start.payload["speed"]))
        return out

    def to_jsonl(self) -> str:
        rows = [json.dumps(ev.to_json(), sort_keys=True) for ev in self.events]
        summary = {
            "kind": "Summary",
            "t": self.final_clock,
            "events": len(self.events),
            "moves": sum(1 for ev in self.events if ev.kind == "MoveEnd"),
            "halted": bool(self.final_state and self.final_state.halted),
            "error": self.error,
        }
        rows.append(json.dumps(summary, sort_keys=True))
        return "\n".join(rows) + "\n"


def to_micro(c) -> Tuple[int, ...]:
    return tuple(int(round(v * SCALE)) for v in c)


def from_micro(c) -> Tuple[float, ...]:
    return tuple(v / SCALE for v in c)


def initial_state(ir: ProgramIR, plant: PlantModel = PlantModel(), start=None) -> VmState:
    return VmState(
        pc=0,
        registers={r.id: to_micro(r.value) for r in ir.registers},
        outputs={},
        inputs={plant.done_port: False},
        clock=0.0,
        plant=PlantState(),
        tcp=tuple(float(v) for v in start) if start is not None else None,
    )


def label_table(ir: ProgramIR) -> Dict[str, int]:
    return {ins.name: i for i, ins in enumerate(ir.body) if isinstance(ins, Label)}


def _advance(state: VmState, plant: PlantModel, t: float, events: List[Event]):
    pst, changes = plant_advance(plant, state.plant, t)
    inputs = state.inputs
    for when, press in changes:
        done = press is PressState.Formed
        if inputs.get(plant.done_port, False) != done:
            inputs = {**inputs, plant.done_port: done}
            events.append(Event(when, "InputChange", {"port": plant.done_port, "on": done, "press": press.value}))
    return replace(state, plant=pst, inputs=inputs)


def step(state: VmState, ir: ProgramIR, plant: PlantModel = PlantModel(), labels=None):
    """Execute one instruction. Returns ``(new_state, events)``."""
    if state.halted:
        return state, []
    if labels is None:
        labels = label_table(ir)
    events: List[Event] = []
    t = state.clock
    if state.pc >= len(ir.body):
        events.append(Event(t, "Halt", {"pc": state.pc}))
        return replace(state, halted=True), events
    ins = ir.body[state.pc]
    nxt = state.pc + 1
    if isinstance(ins, LinearMove):
        if not ins.speed > 0:
            raise InvalidSpeed(f"MOVL P{ins.reg:04d}: speed must be > 0, got {ins.speed}")
        target = from_micro(state.registers[ins.reg])
        start = state.tcp if state.tcp is not None else target
        dist = math.dist(start[:3], target[:3])
        t_end = t + dist / ins.speed
        events.append(Event(t, "MoveStart", {"reg": ins.reg, "from": list(start), "to": list(target), "speed": ins.speed}))
        state = _advance(state, plant, t_end, events)
        events.append(Event(t_end, "MoveEnd", {"reg": ins.reg, "pose": list(target)}))
        state = replace(state, clock=t_end, tcp=target)
    elif isinstance(ins, ModifyPose):
        a = state.registers[ins.reg]
        b = state.registers[ins.operand_reg]
        sign = 1 if ins.op == "add" else -1
        regs = dict(state.registers)
        regs[ins.reg] = tuple(x + sign * y for x, y in zip(a, b))
        state = replace(state, registers=regs)
    elif isinstance(ins, SetOutput):
        prev = state.outputs.get(ins.port, False)
        edge = prev != ins.on
        events.append(Event(t, "OutputSet", {"port": ins.port, "on": ins.on, "edge": edge}))
        state = replace(state, outputs={**state.outputs, ins.port: ins.on})
        if ins.port == plant.command_port and edge:
            state = replace(state, plant=plant_command(plant, state.plant, t, ins.on))
    elif isinstance(ins, Wait):
        events.append(Event(t, "TimerWait", {"seconds": ins.seconds}))
        state = _advance(state, plant, t + ins.seconds, events)
        state = replace(state, clock=t + ins.seconds)
    elif isinstance(ins, BranchIfInput):
        value = state.inputs.get(ins.port, False)
        taken = value == ins.state
        events.append(Event(t, "Branch", {"label": ins.label, "port": ins.port, "state": ins.state, "taken": taken}))
        if taken:
            nxt = labels[ins.label]
    elif isinstance(ins, Jump):
        events.append(Event(t, "Branch", {"label": ins.label, "taken": True}))
        nxt = labels[ins.label]
    return replace(state, pc=nxt, steps=state.steps + 1), events


def run(
    ir: ProgramIR,
    plant: PlantModel = PlantModel(),
    max_steps: int = DEFAULT_MAX_STEPS,
    start=None,
) -> ExecutionTrace:
    """Execute ``ir`` to completion; the fold of :func:`step`.

    ``start`` is the TCP pose before the first move; without it the first
    move starts at its own target and takes no time. Raises
    StepBudgetExceeded (with the partial trace attached) after ``max_steps``
    instructions without halting.
    """
    labels = label_table(ir)
    state = initial_state(ir, plant, start)
    trace = ExecutionTrace(events=[], tcp_waypoints=[], start_pose=state.tcp)
    if state.tcp is not None:
        trace.tcp_waypoints.append((0.0, state.tcp))
    while not state.halted:
        if state.steps >= max_steps and state.pc < len(ir.body):
            trace.final_state = state
            trace.error = f"StepBudgetExceeded: {max_steps} steps at t={state.clock:.2f}s, pc={state.pc}"
            raise StepBudgetExceeded(trace.error, trace=trace)
        try:
            state, events = step(state, ir, plant, labels)
        except InvalidSpeed as exc:
            trace.final_state = state
            trace.error = f"InvalidSpeed: {exc}"
            exc.trace = trace
            raise
        trace.events.extend(events)
        for ev in events:
            if ev.kind == "MoveEnd":
                trace.tcp_waypoints.append((ev.time, tuple(ev.payload["pose"])))
    trace.final_state = state
    return trace
