"""End-to-end helpers: scene -> program text, program -> simulation report."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import List, Optional

from . import geometry
from .bendline import NormalizedPose, normalize_scene
from .codegen import ProgramIR, emit_program, plan_program
from .errors import ExecutionError
from .kinematics import ArmModel, forward
from .scene import CellScene, ProcessParams
from .simulator import (
    DEFAULT_CLEARANCE,
    DEFAULT_DT,
    JointPath,
    SimReport,
    TimedPath,
    build_report,
    check_collisions,
    sample_trace,
    solve_joint_path,
)
from .vm import DEFAULT_MAX_STEPS, ExecutionTrace, PlantModel, run


def example_scene_path() -> str:
    """Filesystem path of the bundled four-bend example cell."""
    return str(resources.files("bendolp").joinpath("data/four_bend_cell.json"))


@dataclass
class Compiled:
    steps: List[NormalizedPose]
    ir: ProgramIR
    text: str


def compile_scene(scene: CellScene, params: Optional[ProcessParams] = None, name: str = "BENDCELL") -> Compiled:
    steps = normalize_scene(scene)
    ir = plan_program(scene, params, name=name, steps=steps)
    return Compiled(steps, ir, emit_program(ir))


def plant_for(params: ProcessParams, **delays) -> PlantModel:
    return PlantModel(done_port=params.press_done_port, command_port=params.press_command_port, **delays)


@dataclass
class Simulation:
    trace: ExecutionTrace
    path: TimedPath
    joints: JointPath
    collisions: list
    report: SimReport


def simulate_program(
    ir: ProgramIR,
    scene: CellScene,
    arm: ArmModel,
    plant: Optional[PlantModel] = None,
    dt: float = DEFAULT_DT,
    clearance: float = DEFAULT_CLEARANCE,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Simulation:
    """Run the VM from the arm's home pose, then sample, solve joints and check collisions.

    Execution errors do not raise: the partial trace is simulated and the
    error lands in ``report.vm_errors``.
    """
    plant = plant or plant_for(scene.params)
    start = geometry.to_cartesian(forward(arm, arm.home))
    try:
        trace = run(ir, plant, max_steps=max_steps, start=start)
    except ExecutionError as exc:
        trace = exc.trace
    path = sample_trace(trace, dt)
    joints = solve_joint_path(path, arm)
    collisions = check_collisions(path, scene.collision_world, clearance, frame=scene.robot_base)
    rep = build_report(trace, path, joints, collisions, program=ir.name)
    return Simulation(trace, path, joints, collisions, rep)
