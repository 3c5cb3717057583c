"""Command-line entry point.

Exit codes: 0 ok, 1 IO error, 2 validation error, 3 internal error,
4 simulation found abnormalities.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from typing import List, Optional

from . import kinematics, simulator
from .bendline import normalize_scene
from .errors import BendError, InternalError, ProgramError, SceneError
from .scene import ProcessParams, coerce_param, load_scene
from .vm import DEFAULT_MAX_STEPS, parse_program
from .pipeline import compile_scene, plant_for, simulate_program

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_INTERNAL, EXIT_ABNORMAL = 0, 1, 2, 3, 4

PLANT_KEYS = ("pinch_delay", "form_delay", "open_delay")


class UsageError(Exception):
    pass


def _parse_value(name: str, raw: str):
    if name in PLANT_KEYS:
        try:
            v = float(raw)
        except ValueError:
            raise UsageError(f"override {name}: not a number: {raw!r}") from None
        if math.isnan(v) or v < 0:
            raise UsageError(f"override {name} must be >= 0")
        return v
    if name == "name":
        return raw
    parts = [p.strip() for p in raw.split(",")]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"override {name}: not numeric: {raw!r}") from None
    value = nums if len(nums) > 1 else nums[0]
    try:
        return coerce_param(name, value, where="override")
    except SceneError as exc:
        raise UsageError(str(exc)) from None


def parse_overrides(items: List[str]):
    """Split ``k=v`` overrides into (ProcessParams changes, plant delays, job name)."""
    param_names = {f.name for f in dataclasses.fields(ProcessParams)}
    params, plant, name = {}, {}, None
    for item in items or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"override {item!r} is not key=value")
        if key in PLANT_KEYS:
            plant[key] = _parse_value(key, raw)
        elif key == "name":
            name = raw.strip()
        elif key in param_names:
            params[key] = _parse_value(key, raw)
        else:
            raise UsageError(f"unknown override key {key!r}")
    return params, plant, name


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(args):
    scene = load_scene(args.scene)
    params_over, plant_over, name = parse_overrides(args.override)
    params = dataclasses.replace(scene.params, **params_over)
    try:
        params.validate()
    except SceneError as exc:
        raise UsageError(str(exc)) from None
    scene = dataclasses.replace(scene, params=params)
    return scene, plant_over, (name or args.name)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_check(args) -> int:
    scene = load_scene(args.scene)
    parse_overrides(args.override)
    steps = normalize_scene(scene)
    for w in scene.warnings:
        _diag(str(w))
    moved = [s for s in steps if s.ladder_index]
    print(f"OK: {len(steps)} tool poses, {len(moved)} moved from virtual bending lines")
    return EXIT_OK


def cmd_compile(args) -> int:
    scene, _, name = _load(args)
    for w in scene.warnings:
        _diag(str(w))
    compiled = compile_scene(scene, name=name)
    os.makedirs(args.out, exist_ok=True)
    target = os.path.join(args.out, f"{name}.JBI")
    _write(target, compiled.text)
    print(target)
    return EXIT_OK


def _simulate(args):
    scene, plant_over, name = _load(args)
    for w in scene.warnings:
        _diag(str(w))
    if args.job:
        with open(args.job, encoding="utf-8") as fh:
            ir = parse_program(fh.read())
    else:
        ir = compile_scene(scene, name=name).ir
    arm = kinematics.load_arm(args.arm)
    plant = plant_for(scene.params, **plant_over)
    sim = simulate_program(
        ir, scene, arm, plant, dt=args.dt, clearance=args.clearance, max_steps=args.max_steps
    )
    os.makedirs(args.out, exist_ok=True)
    return scene, sim


def cmd_simulate(args) -> int:
    scene, sim = _simulate(args)
    _write(os.path.join(args.out, "trace.jsonl"), sim.trace.to_jsonl())
    text = simulator.report(sim.report, sim.path, args.out, scene.collision_world, scene.robot_base)
    sys.stdout.write(text)
    return EXIT_OK if sim.report.clean else EXIT_ABNORMAL


def cmd_plot(args) -> int:
    scene, sim = _simulate(args)
    for p in simulator.write_plots(sim.path, args.out, scene.collision_world, sim.collisions, scene.robot_base):
        print(p)
    return EXIT_OK


COMMANDS = {"compile": cmd_compile, "check": cmd_check, "simulate": cmd_simulate, "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bendolp", description="Compile and simulate robot programs for a press-brake bending cell."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, help_text in (
        ("compile", "generate the JBI job file"),
        ("check", "validate and normalize the scene without writing files"),
        ("simulate", "run the job against the press and arm models"),
        ("plot", "write path plots only"),
    ):
        p = sub.add_parser(cmd, help=help_text)
        p.add_argument("--scene", required=True, help="scene JSON file")
        p.add_argument("--override", action="append", default=[], metavar="K=V", help="parameter override (repeatable)")
        if cmd == "check":
            continue
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--name", default="BENDCELL", help="job name")
        if cmd in ("simulate", "plot"):
            p.add_argument("--arm", default=None, help="arm JSON file (default: bundled arm)")
            p.add_argument("--job", default=None, help="simulate this JBI file instead of compiling the scene")
            p.add_argument("--dt", type=float, default=simulator.DEFAULT_DT)
            p.add_argument("--clearance", type=float, default=simulator.DEFAULT_CLEARANCE)
            p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "dt", 1.0) <= 0 or getattr(args, "clearance", 0.0) < 0:
        _diag("error: --dt must be > 0 and --clearance >= 0")
        return EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SceneError, ProgramError, kinematics.ArmModelError) as exc:
        code = getattr(exc, "code", "UsageError")
        _diag(f"error: {code}: {exc}")
        return EXIT_VALIDATION
    except InternalError as exc:
        _diag(f"internal error: {exc}")
        return EXIT_INTERNAL
    except OSError as exc:
        _diag(f"error: IO: {exc}")
        return EXIT_IO
    except BendError as exc:
        _diag(f"internal error: {exc.__class__.__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
