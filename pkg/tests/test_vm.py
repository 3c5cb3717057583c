import json
import math

import pytest

from bendolp import vm
from bendolp.codegen import (
    BranchIfInput,
    Comment,
    Label,
    LinearMove,
    ModifyPose,
    PoseRegister,
    ProgramIR,
    SetOutput,
    Wait,
    emit_program,
    expand_bend_cycle,
    plan_program,
)
from bendolp.errors import InvalidSpeed, ProgramSyntaxError, StepBudgetExceeded, UndefinedLabel, UndefinedRegister
from bendolp.scene import ProcessParams
from bendolp.vm import PlantModel, PlantState, PressState, parse_program, plant_advance, plant_command, run, step

from golden_cycle import GOLDEN_BLOCK

HEADER = """/JOB
//NAME STEP10
//POS
///NPOS 0,0,0,3,0,0
///TOOL 0
///POSTYPE BASE
///RECTAN
C00010=850.000000,0.000000,850.000000,-90.000000,0.000000,-90.000000
C00034=0.000000,0.000000,50.000000,0.000000,0.000000,0.000000
C00035=100.000000,0.000000,0.000000,0.000000,0.000000,0.000000
//INST
///ATTR SC,RW
///GROUP1 RB1
NOP
"""

# close the excerpt so every referenced label exists
EXCERPT_TAIL = """DOUT OT#(2) OFF
*STEPB10
END
"""


def excerpt_program():
    return parse_program(HEADER + GOLDEN_BLOCK + EXCERPT_TAIL)


def test_parse_golden_excerpt():
    ir = parse_program(HEADER + GOLDEN_BLOCK + "*STEPB10\nEND\n")
    instr = [i for i in ir.body if not isinstance(i, (Comment, Label))]
    labels = [i for i in ir.body if isinstance(i, Label)]
    assert len(instr) == 13
    assert [l.name for l in labels] == ["STEPA10", "STEPB10"]
    assert instr[0] == ModifyPose(10, "add", 34)
    assert instr[2] == LinearMove(10, 169.0)
    assert instr[8] == BranchIfInput(1, True, "STEPA10")
    assert ir.register_map()[10] == (850.0, 0.0, 850.0, -90.0, 0.0, -90.0)


def test_round_trip_example(example_scene):
    ir = plan_program(example_scene)
    assert parse_program(emit_program(ir)) == ir


def test_undefined_register_line():
    text = HEADER + "MOVL P0099 V=10\nEND\n"
    with pytest.raises(UndefinedRegister) as info:
        parse_program(text)
    assert info.value.line == text.splitlines().index("MOVL P0099 V=10") + 1


def test_undefined_label():
    with pytest.raises(UndefinedLabel):
        parse_program(HEADER + "JUMP *NOPE IF IN#(1)=ON\nEND\n")


def test_syntax_error():
    with pytest.raises(ProgramSyntaxError):
        parse_program(HEADER + "MOVJ P0010 VJ=10\nEND\n")


def test_waits_accumulate():
    ir = ProgramIR("W", (), (Wait(2.0), Wait(0.5)))
    trace = run(ir)
    assert trace.final_state.halted and trace.final_clock == 2.5
    assert trace.events[-1].kind == "Halt"


def test_step10_branch_taken_when_press_is_fast():
    # press edge at t0 (end of second move); pinch 1.0 < TIMER 2.00, so done is on at the branch
    trace = run(excerpt_program(), PlantModel(pinch_delay=1.0))
    branches = [e for e in trace.events if e.kind == "Branch"]
    assert branches[0].payload["label"] == "STEPA10" and branches[0].payload["taken"]
    t_edge = next(e.time for e in trace.events if e.kind == "OutputSet" and e.payload["port"] == 2)
    t_done = next(e.time for e in trace.events if e.kind == "InputChange" and e.payload["on"])
    assert t_done == pytest.approx(t_edge + 1.0, abs=1e-12)


def full_cycle_program():
    regs = (
        PoseRegister(10, (850.0, 0.0, 850.0, -90.0, 0.0, -90.0)),
        PoseRegister(11, (850.0, 30.0, 850.0, -90.0, 0.0, -90.0)),
        PoseRegister(34, (0.0, 0.0, 50.0, 0.0, 0.0, 0.0)),
        PoseRegister(35, (100.0, 0.0, 0.0, 0.0, 0.0, 0.0)),
    )
    return ProgramIR("CYCLE", regs, tuple(expand_bend_cycle(10, 11, ProcessParams(), 10)))


def test_step10_dead_press_exhausts_budget():
    with pytest.raises(StepBudgetExceeded) as info:
        run(full_cycle_program(), PlantModel(pinch_delay=10.0), max_steps=50)
    labels = [e.payload["label"] for e in info.value.trace.events if e.kind == "Branch" and e.payload["taken"]]
    assert labels and set(labels) == {"STEPB10"}


def test_slow_press_recovers_through_retry_loop():
    # done rises at 3.0 s after the edge; the loop polls every 0.1 s and then resumes at STEPA
    trace = run(full_cycle_program(), PlantModel(pinch_delay=3.0))
    taken = [e.payload["label"] for e in trace.events if e.kind == "Branch" and e.payload["taken"]]
    assert taken[0] == "STEPB10" and "STEPA10" in taken and taken[-1] == "STEPC10"
    assert trace.final_state.halted


def test_budget_excludes_halt():
    ir = ProgramIR("W", (), (Wait(1.0), Wait(1.0)))
    assert run(ir, max_steps=2).final_state.halted
    with pytest.raises(StepBudgetExceeded):
        run(ir, max_steps=1)


def test_modify_pose_elementwise():
    regs = (PoseRegister(1, (1.0, 2.0, 3.0, 10.0, 20.0, 30.0)), PoseRegister(2, (0.5, 0.25, -3.0, 1.0, 2.0, 3.0)))
    ir = ProgramIR("M", regs, (ModifyPose(1, "add", 2),))
    state, events = step(vm.initial_state(ir), ir)
    assert vm.from_micro(state.registers[1]) == (1.5, 2.25, 0.0, 11.0, 22.0, 33.0)
    assert events == [] and state.pc == 1


def test_add_sub_restore_exactly():
    regs = (PoseRegister(1, (0.1, 0.2, 0.3, 0.0, 0.0, 0.0)), PoseRegister(2, (1e-6, 0.7, 1e3, 0.1, 0.1, 0.1)))
    body = tuple([ModifyPose(1, "add", 2)] * 7 + [ModifyPose(1, "sub", 2)] * 7)
    ir = ProgramIR("R", regs, body)
    assert run(ir).final_state.registers == vm.initial_state(ir).registers


def test_label_keeps_clock():
    ir = ProgramIR("L", (), (Wait(1.0), Label("X")))
    s = vm.initial_state(ir)
    s, _ = step(s, ir)
    s2, ev = step(s, ir)
    assert s2.clock == s.clock and s2.pc == 2 and ev == []


def test_output_already_on_has_no_edge():
    ir = ProgramIR("O", (), (SetOutput(2, True), SetOutput(2, True)))
    trace = run(ir)
    edges = [e.payload["edge"] for e in trace.events if e.kind == "OutputSet"]
    assert edges == [True, False]


def test_move_duration_and_events():
    regs = (PoseRegister(1, (169.0, 0.0, 0.0, 0.0, 0.0, 0.0)),)
    ir = ProgramIR("V", regs, (LinearMove(1, 169.0),))
    trace = run(ir, start=(0.0,) * 6)
    assert trace.final_clock == pytest.approx(1.0)
    assert [e.kind for e in trace.events] == ["MoveStart", "MoveEnd", "Halt"]


def test_invalid_speed():
    regs = (PoseRegister(1, (1.0, 0, 0, 0, 0, 0)),)
    with pytest.raises(InvalidSpeed):
        run(ProgramIR("V", regs, (LinearMove(1, 0.0),)))


def test_plant_timeline():
    m = PlantModel(pinch_delay=1.0, form_delay=1.5, open_delay=1.0)
    st = plant_command(m, PlantState(), 0.0, True)
    assert st.press_state is PressState.Closing
    st, ch = plant_advance(m, st, 5.0)
    assert ch == [(1.0, PressState.Formed)]
    st = plant_command(m, st, 5.0, False)
    st, ch = plant_advance(m, st, 10.0)
    # form dwell already elapsed, so the ram opens at the falling edge
    assert ch == [(5.0, PressState.Opening), (6.0, PressState.Open)]


def test_plant_abort_and_latched_edge():
    m = PlantModel()
    st = plant_command(m, PlantState(), 0.0, True)
    st = plant_command(m, st, 0.5, False)
    assert st.press_state is PressState.Opening
    st = plant_command(m, st, 0.7, True)
    st, ch = plant_advance(m, st, 3.0)
    assert ch == [(1.5, PressState.Closing), (2.5, PressState.Formed)]


def test_infinite_pinch_never_done():
    m = PlantModel(pinch_delay=math.inf)
    st = plant_command(m, PlantState(), 0.0, True)
    st, ch = plant_advance(m, st, 1e9)
    assert ch == [] and not st.done


def test_trace_jsonl(example_scene):
    trace = run(plan_program(example_scene), start=(900.0, 0, 1400, 0, -30, 180))
    rows = [json.loads(l) for l in trace.to_jsonl().splitlines()]
    assert rows[-1]["kind"] == "Summary" and rows[-1]["halted"]
    times = [r["t"] for r in rows[:-1]]
    assert times == sorted(times)


def test_piece_registers_restored(example_scene):
    import dataclasses

    params = dataclasses.replace(example_scene.params, piece_count=3, pallet_increment=(0.0, 0.0, -3.0))
    ir = plan_program(example_scene, params)
    init = vm.initial_state(ir)
    state, seen = init, 0
    labels = vm.label_table(ir)
    while not state.halted:
        ins = ir.body[state.pc] if state.pc < len(ir.body) else None
        if isinstance(ins, Comment) and ins.text.startswith("----- PIECE"):
            assert state.registers == init.registers
            seen += 1
        state, _ = step(state, ir, labels=labels)
    assert seen == 3 and state.registers == init.registers


def test_pallet_increment_in_vm(minimal_doc):
    import dataclasses

    from bendolp.scene import parse_scene

    scene = parse_scene(json.dumps(minimal_doc()))
    params = dataclasses.replace(scene.params, piece_count=3, pallet_increment=(0.0, 0.0, -3.0))
    ir = plan_program(scene, params)
    trace = run(ir)
    pick = ir.register_map()[1]
    place = ir.register_map()[4]
    # descending moves: second move of each stacked block lands on the target
    ends = [(m[3], m[0]) for m in trace.moves()]
    picks = [p for p, _ in ends if p[0] == pick[0] and p[1] == pick[1] and p[2] < pick[2] + 1]
    places = [p for p, _ in ends if p[0] == place[0] and p[1] == place[1] and p[2] < place[2] + 1]
    assert [p[2] for p in picks] == pytest.approx([pick[2], pick[2] - 3, pick[2] - 6])
    assert [p[2] for p in places] == pytest.approx([place[2], place[2] - 3, place[2] - 6])
