"""Turn an execution trace into a sampled TCP path, joint path, collision list and report."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import geometry, kernels
from .errors import LimitViolation, NoConvergence
from .geometry import Pose
from .kinematics import ArmModel, inverse
from .scene import Box
from .vm import ExecutionTrace

DEFAULT_DT = 0.01
DEFAULT_CLEARANCE = 5.0


@dataclass
class TimedPath:
    """TCP samples in the robot base frame."""

    times: np.ndarray  # (N,)
    positions: np.ndarray  # (N, 3) mm
    rotations: np.ndarray  # (N, 3, 3)
    dt: float = DEFAULT_DT

    def __len__(self):
        return len(self.times)

    @property
    def samples(self) -> List[Tuple[float, Pose]]:
        return [(float(t), Pose(r, p)) for t, p, r in zip(self.times, self.positions, self.rotations)]

    def pose(self, i: int) -> Pose:
        return Pose(self.rotations[i], self.positions[i])

    def length(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))


@dataclass
class JointPath:
    times: np.ndarray
    q: np.ndarray  # (N, 6) degrees, NaN rows where IK failed
    unreachable: List[dict] = field(default_factory=list)
    limit_hits: List[dict] = field(default_factory=list)


@dataclass
class SimReport:
    collisions: List[dict] = field(default_factory=list)
    unreachable: List[dict] = field(default_factory=list)
    limit_hits: List[dict] = field(default_factory=list)
    vm_errors: List[str] = field(default_factory=list)
    totals: Dict[str, float] = field(default_factory=dict)
    program: str = ""

    @property
    def clean(self) -> bool:
        return not (self.collisions or self.unreachable or self.limit_hits or self.vm_errors)

    def summary_line(self) -> str:
        line = (
            f"{len(self.collisions)} collisions, {len(self.unreachable)} unreachable, "
            f"{len(self.limit_hits)} limit hits"
        )
        if self.vm_errors:
            line += f", {len(self.vm_errors)} program errors"
        return line

    def to_dict(self) -> dict:
        return asdict(self)


# -- sampling ------------------------------------------------------------------


def _grid(t_end: float, dt: float) -> np.ndarray:
    n = int(math.floor(t_end / dt + 1e-9))
    ts = np.arange(n + 1, dtype=float) * dt
    if t_end - ts[-1] > 1e-9:
        ts = np.append(ts, t_end)
    return ts


def sample_trace(trace: ExecutionTrace, dt: float = DEFAULT_DT) -> TimedPath:
    """Sample the TCP at a fixed ``dt`` (the final clock is always the last sample).

    Position is linear between a move's endpoints at constant speed, orientation
    follows the shortest arc; the TCP holds still during waits and IO.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    moves = trace.moves()
    if trace.start_pose is not None:
        rest = trace.start_pose
    elif moves:
        rest = moves[0][2]
    else:
        rest = (0.0,) * 6
    t_end = trace.final_clock
    if moves:
        t_end = max(t_end, moves[-1][1])
    ts = _grid(t_end, dt)

    # per-move data
    starts = np.array([m[0] for m in moves]) if moves else np.zeros(0)
    prepared = []
    for t0, t1, a, b, _ in moves:
        r0 = geometry.rotation_from_euler(a[3:6])
        r1 = geometry.rotation_from_euler(b[3:6])
        w = geometry.rotation_log(r0.T @ r1)
        prepared.append((t0, t1, np.array(a[:3]), np.array(b[:3]), r0, w, r1))

    positions = np.empty((len(ts), 3))
    rotations = np.empty((len(ts), 3, 3))
    positions[:] = np.array(rest[:3], dtype=float)
    rotations[:] = geometry.rotation_from_euler(rest[3:6])
    ks = np.searchsorted(starts, ts, side="right") - 1
    for k, (t0, t1, pa, pb, r0, w, r1) in enumerate(prepared):
        idx = np.nonzero(ks == k)[0]
        if not len(idx):
            continue
        held = ts[idx] >= t1
        positions[idx[held]], rotations[idx[held]] = pb, r1
        for i in idx[~held]:
            s = (ts[i] - t0) / (t1 - t0)
            positions[i] = pa + s * (pb - pa)
            rotations[i] = r0 @ geometry.rotation_exp(s * w)
    return TimedPath(ts, positions, rotations, dt)


# -- joints --------------------------------------------------------------------


def solve_joint_path(path: TimedPath, arm: ArmModel, seed=None) -> JointPath:
    """Chained-seed IK along the path.

    Failures are recorded, not raised; the next sample is seeded from the
    last good solution.
    """
    n = len(path)
    q_out = np.full((n, 6), np.nan)
    unreachable, limit_hits = [], []
    good = np.asarray(arm.home if seed is None else seed, dtype=float)
    # samples identical to their predecessor share its outcome (same target, same seed)
    moved = np.ones(n, dtype=bool)
    if n > 1:
        moved[1:] = np.any(path.positions[1:] != path.positions[:-1], axis=1) | np.any(
            path.rotations[1:] != path.rotations[:-1], axis=(1, 2)
        )
    starts = np.nonzero(moved)[0]
    ends = np.append(starts[1:], n)
    for i, j in zip(starts.tolist(), ends.tolist()):
        times = path.times[i:j].tolist()
        try:
            q = inverse(arm, path.pose(i), good)
            q_out[i:j] = q
            good = q
        except LimitViolation as exc:
            q_out[i:j] = exc.q
            for t in times:
                for d in exc.diagnostics:
                    limit_hits.append({"time": t, "joint": d.joint, "value": d.value})
        except NoConvergence as exc:
            unreachable.extend({"time": t, "residual": float(exc.residual)} for t in times)
    return JointPath(path.times.copy(), q_out, unreachable, limit_hits)


# -- collisions ----------------------------------------------------------------


def world_points(path: TimedPath, frame: Optional[Pose] = None) -> np.ndarray:
    if frame is None:
        return path.positions.copy()
    return path.positions @ frame.rotation.T + frame.position


def _segment_min(p0, p1, lo, hi, iters: int = 80):
    """Minimum signed distance along a segment (convex in the parameter)."""
    f = lambda s: float(kernels.point_box_sd((p0 + s * (p1 - p0))[None, :], lo, hi)[0])
    a, b = 0.0, 1.0
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    cands = [(f(0.0), 0.0), (f(1.0), 1.0), (fc, c), (fd, d)]
    return min(cands)


def check_collisions(
    path: TimedPath,
    world: Sequence[Box],
    clearance: float = DEFAULT_CLEARANCE,
    frame: Optional[Pose] = None,
) -> List[dict]:
    """TCP-point vs box check on the piecewise-linear sampled path.

    An event is raised where the signed distance drops strictly below
    ``clearance``; contiguous colliding spans merge into one event.
    ``penetration`` is the depth of the deepest point below the box surface
    (0 when only the clearance band was entered).
    """
    if clearance < 0:
        raise ValueError("clearance must be >= 0")
    pts = world_points(path, frame)
    n = len(pts)
    events = []
    for box in world:
        lo, hi = np.array(box.min, dtype=float), np.array(box.max, dtype=float)
        sd = kernels.point_box_sd(pts, lo, hi)
        if n == 1:
            if sd[0] < clearance:
                events.append(_event(box, path.times[0], path.times[0], path.times[0], sd[0]))
            continue
        seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        bound = 0.5 * (sd[:-1] + sd[1:] - seg_len)  # sd is 1-Lipschitz
        span = None  # [t_start, t_end, t_deep, d_min]
        for i in np.nonzero(bound < clearance)[0].tolist() + [None]:
            hit = None
            if i is not None:
                dmin, s = _segment_min(pts[i], pts[i + 1], lo, hi)
                if dmin < clearance:
                    t0, t1 = float(path.times[i]), float(path.times[i + 1])
                    hit = (i, t0, t1, t0 + s * (t1 - t0), dmin)
            if span is not None and (hit is None or hit[0] != span[4] + 1):
                events.append(_event(box, *span[:4]))
                span = None
            if hit is not None:
                if span is None:
                    span = [hit[1], hit[2], hit[3], hit[4], hit[0]]
                else:
                    span[1], span[4] = hit[2], hit[0]
                    if hit[4] < span[3]:
                        span[2], span[3] = hit[3], hit[4]
    events.sort(key=lambda e: (e["t_start"], e["box_id"]))
    return events


def _event(box: Box, t_start, t_end, t_deep, d_min) -> dict:
    return {
        "box_id": box.id,
        "time": float(t_deep),
        "t_start": float(t_start),
        "t_end": float(t_end),
        "min_distance": float(d_min),
        "penetration": float(max(0.0, -d_min)),
    }


# -- report --------------------------------------------------------------------


def build_report(
    trace: ExecutionTrace,
    path: TimedPath,
    joints: Optional[JointPath],
    collisions: List[dict],
    program: str = "",
) -> SimReport:
    return SimReport(
        collisions=collisions,
        unreachable=list(joints.unreachable) if joints else [],
        limit_hits=list(joints.limit_hits) if joints else [],
        vm_errors=[trace.error] if trace.error else [],
        totals={
            "path_length": path.length(),
            "cycle_time": trace.final_clock,
            "samples": len(path),
            "dt": path.dt,
        },
        program=program,
    )


def report_text(sim: SimReport) -> str:
    lines = [
        f"program: {sim.program}",
        f"cycle time: {sim.totals.get('cycle_time', 0.0):.3f} s",
        f"path length: {sim.totals.get('path_length', 0.0):.3f} mm",
        f"samples: {sim.totals.get('samples', 0)} (dt = {sim.totals.get('dt', 0.0):g} s)",
        sim.summary_line(),
    ]
    for err in sim.vm_errors:
        lines.append(f"  program error: {err}")
    for c in sim.collisions:
        lines.append(
            f"  collision with {c['box_id']} at t={c['time']:.3f} s "
            f"[{c['t_start']:.3f}, {c['t_end']:.3f}] min distance {c['min_distance']:.3f} mm, "
            f"penetration {c['penetration']:.3f} mm"
        )
    # unreachable samples come in runs; list each run once
    for start, end, worst in _runs(sim.unreachable, sim.totals.get("dt", DEFAULT_DT)):
        lines.append(f"  unreachable t=[{start:.3f}, {end:.3f}] s, worst residual {worst:.3g}")
    for hit in sim.limit_hits:
        lines.append(f"  joint {hit['joint']} limit at t={hit['time']:.3f} s ({hit['value']:.2f} deg)")
    return "\n".join(lines) + "\n"


def _runs(items, dt):
    runs = []
    for it in items:
        if runs and it["time"] - runs[-1][1] <= dt * 1.5:
            runs[-1] = (runs[-1][0], it["time"], max(runs[-1][2], it["residual"]))
        else:
            runs.append((it["time"], it["time"], it["residual"]))
    return runs


def _svg(path_pts, boxes, collisions, times, axes, title) -> str:
    i, j = axes
    xs, ys = list(path_pts[:, i]), list(path_pts[:, j])
    for b in boxes:
        xs += [b.min[i], b.max[i]]
        ys += [b.min[j], b.max[j]]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1.0)
    size, margin = 600.0, 30.0
    k = (size - 2 * margin) / span

    def px(x, y):
        return margin + (x - x0) * k, size - margin - (y - y0) * k

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">',
        f"<title>{title}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for b in boxes:
        ax, ay = px(b.min[i], b.max[j])
        w, h = (b.max[i] - b.min[i]) * k, (b.max[j] - b.min[j]) * k
        out.append(
            f'<rect x="{ax:.2f}" y="{ay:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="#d0d0d0" stroke="#808080"><title>{b.id}</title></rect>'
        )
    if len(path_pts):
        pts = " ".join("%.2f,%.2f" % px(p[i], p[j]) for p in path_pts)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" stroke-width="1"/>')
    for c in collisions:
        sel = (times >= c["t_start"] - 1e-12) & (times <= c["t_end"] + 1e-12)
        seg = path_pts[sel]
        if len(seg):
            pts = " ".join("%.2f,%.2f" % px(p[i], p[j]) for p in seg)
            out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(path: TimedPath, out_dir, world=(), collisions=(), frame: Optional[Pose] = None) -> List[str]:
    """Orthographic XY and XZ projections (world frame) as SVG. Returns file paths."""
    pts = world_points(path, frame)
    written = []
    for fname, axes, title in (("path_xy.svg", (0, 1), "TCP path, XY"), ("path_xz.svg", (0, 2), "TCP path, XZ")):
        target = os.path.join(out_dir, fname)
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_svg(pts, world, collisions, path.times, axes, title))
        written.append(target)
    return written


def report(
    sim: SimReport,
    path: TimedPath,
    out_dir=None,
    world: Sequence[Box] = (),
    frame: Optional[Pose] = None,
) -> str:
    """Summary text; with ``out_dir``, also writes report.txt, sim.json and the SVG plots."""
    text = report_text(sim)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(os.path.join(out_dir, "sim.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(sim.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        write_plots(path, out_dir, world, sim.collisions, frame)
    return text
