"""Six-revolute serial arm: forward kinematics, numeric Jacobian, DLS inverse kinematics.

FK is ``base @ prod(DH_i(q_i)) @ tool`` with standard DH rows
``Rz(theta) Tz(d) Tx(a) Rx(alpha)``. Joint angles are degrees at the interface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import BendError, LimitViolation, NoConvergence
from .geometry import Pose, checked_rotation, rotation_from_euler

POS_TOL = 1e-6  # mm
ROT_TOL = 1e-6  # rad
JACOBIAN_STEP = 1e-6  # rad
ORIENTATION_SCALE = 500.0  # mm per rad, balances the DLS residual


class ArmModelError(BendError):
    code = "InvalidArm"


@dataclass(frozen=True, eq=False)
class ArmModel:
    dh_rows: np.ndarray  # (6, 4): a mm, alpha deg, d mm, theta_offset deg
    joint_limits: np.ndarray  # (6, 2): min deg, max deg
    base: Pose = field(default_factory=Pose.identity)
    tool: Pose = field(default_factory=Pose.identity)
    home: Tuple[float, ...] = (0.0,) * 6
    name: str = "arm"

    def __post_init__(self):
        dh = np.array(self.dh_rows, dtype=float)
        lim = np.array(self.joint_limits, dtype=float)
        if dh.shape != (6, 4):
            raise ArmModelError("ArmModel needs exactly 6 DH rows of (a, alpha, d, theta_offset)")
        if lim.shape != (6, 2) or not np.all(lim[:, 0] < lim[:, 1]):
            raise ArmModelError("joint_limits must be 6 (min, max) pairs with min < max")
        if len(self.home) != 6:
            raise ArmModelError("home must have 6 joint angles")
        if not (np.all(np.isfinite(dh)) and np.all(np.isfinite(lim))):
            raise ArmModelError("arm parameters must be finite")
        dh.setflags(write=False)
        lim.setflags(write=False)
        object.__setattr__(self, "dh_rows", dh)
        object.__setattr__(self, "joint_limits", lim)
        object.__setattr__(self, "home", tuple(float(v) for v in self.home))
        # kernel inputs: radians, contiguous
        dh_rad = np.ascontiguousarray(dh.copy())
        dh_rad[:, 1] = np.radians(dh[:, 1])
        dh_rad[:, 3] = np.radians(dh[:, 3])
        object.__setattr__(self, "_dh", dh_rad)
        object.__setattr__(self, "_base", np.ascontiguousarray(self.base.matrix))
        object.__setattr__(self, "_tool", np.ascontiguousarray(self.tool.matrix))


@dataclass(frozen=True)
class LimitDiagnostic:
    joint: int  # 1-based
    value: float
    min: float
    max: float

    def __str__(self):
        return f"joint {self.joint} = {self.value:.3f} deg outside [{self.min:g}, {self.max:g}]"


@dataclass
class IKResult:
    q: np.ndarray  # degrees
    converged: bool
    iterations: int
    position_error: float
    rotation_error: float
    residuals: List[float]  # weighted residual after each accepted iteration


def _pose_from_json(obj, where) -> Pose:
    position = obj.get("position", [0.0, 0.0, 0.0])
    if "rotation" in obj:
        rot = checked_rotation(obj["rotation"])
    else:
        rot = rotation_from_euler(obj.get("euler_xyz_deg", [0.0, 0.0, 0.0]))
    return Pose(rot, position)


def arm_from_dict(doc) -> ArmModel:
    try:
        return ArmModel(
            dh_rows=doc["dh_rows"],
            joint_limits=doc["joint_limits"],
            base=_pose_from_json(doc.get("base", {}), "base"),
            tool=_pose_from_json(doc.get("tool", {}), "tool"),
            home=tuple(doc.get("home", (0.0,) * 6)),
            name=str(doc.get("name", "arm")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArmModelError(f"invalid arm description: {exc}") from None


def load_arm(path=None) -> ArmModel:
    """Load an arm JSON file; ``None`` loads the bundled default arm."""
    if path is None:
        text = resources.files("bendolp").joinpath("data/default_arm.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArmModelError(f"arm file is not valid JSON: {exc}") from None
    return arm_from_dict(doc)


def forward_matrix(arm: ArmModel, q_deg) -> np.ndarray:
    return kernels.fk(arm._dh, np.radians(np.asarray(q_deg, dtype=float)), arm._base, arm._tool)


def forward(arm: ArmModel, q_deg) -> Pose:
    return Pose.from_matrix(forward_matrix(arm, q_deg))


def numeric_jacobian(arm: ArmModel, q_deg, h: float = JACOBIAN_STEP) -> np.ndarray:
    """6x6 central-difference Jacobian. Rows: position (mm/rad), orientation (rad/rad)."""
    return kernels.jacobian(arm._dh, np.radians(np.asarray(q_deg, dtype=float)), arm._base, arm._tool, h)


def within_limits(arm: ArmModel, q_deg) -> List[LimitDiagnostic]:
    out = []
    for i, (v, (lo, hi)) in enumerate(zip(q_deg, arm.joint_limits)):
        if not lo <= v <= hi:
            out.append(LimitDiagnostic(i + 1, float(v), float(lo), float(hi)))
    return out


def _wrap_into_limits(arm: ArmModel, q: np.ndarray, seed) -> np.ndarray:
    """Pick the whole-turn equivalent of each joint nearest the seed, then
    shift by a turn where that brings a joint inside its limits."""
    seed = np.asarray(seed, dtype=float)
    q = seed + (np.asarray(q, dtype=float) - seed + 180.0) % 360.0 - 180.0
    for i, (lo, hi) in enumerate(arm.joint_limits):
        if lo <= q[i] <= hi:
            continue
        for k in (-1, 1, -2, 2):
            cand = q[i] + 360.0 * k
            if lo <= cand <= hi:
                q[i] = cand
                break
    return q


def solve_ik(
    arm: ArmModel,
    target: Pose,
    seed,
    *,
    max_iter: int = 200,
    damping: float = 1e-3,
    pos_tol: float = POS_TOL,
    rot_tol: float = ROT_TOL,
) -> IKResult:
    """Damped least squares with adaptive damping.

    A step is accepted only if it lowers the weighted residual; on acceptance
    damping shrinks by 10, on rejection it grows by 10. Never raises.
    """
    tgt = np.ascontiguousarray(target.matrix)
    w = np.array([1.0, 1.0, 1.0, ORIENTATION_SCALE, ORIENTATION_SCALE, ORIENTATION_SCALE])
    q = np.radians(np.asarray(seed, dtype=float)).copy()

    def evaluate(qr):
        m = kernels.fk(arm._dh, qr, arm._base, arm._tool)
        e = kernels.pose_error(m, tgt)
        return e, float(np.linalg.norm(w * e))

    e, r = evaluate(q)
    residuals = [r]
    lam = damping
    it = 0
    eye = np.eye(6)
    while it < max_iter:
        if np.linalg.norm(e[:3]) <= pos_tol and np.linalg.norm(e[3:]) <= rot_tol:
            break
        it += 1
        jw = w[:, None] * kernels.jacobian(arm._dh, q, arm._base, arm._tool, JACOBIAN_STEP)
        ew = w * e
        jjt = jw @ jw.T
        accepted = False
        while lam < 1e12:
            dq = jw.T @ np.linalg.solve(jjt + lam * eye, ew)
            e_new, r_new = evaluate(q + dq)
            if r_new < r:
                q, e, r = q + dq, e_new, r_new
                residuals.append(r)
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break  # stalled: no step lowers the residual
    pe, re = float(np.linalg.norm(e[:3])), float(np.linalg.norm(e[3:]))
    return IKResult(
        q=np.degrees(q),
        converged=pe <= pos_tol and re <= rot_tol,
        iterations=it,
        position_error=pe,
        rotation_error=re,
        residuals=residuals,
    )


def inverse(arm: ArmModel, target: Pose, seed=None, **kw) -> np.ndarray:
    """Joint angles (deg) reaching ``target``, starting the search at ``seed``.

    Raises NoConvergence when the residual stays above tolerance and
    LimitViolation when the solution needs an out-of-range joint.
    """
    if seed is None:
        seed = arm.home
    res = solve_ik(arm, target, seed, **kw)
    if not res.converged:
        raise NoConvergence(
            f"IK did not converge (position error {res.position_error:.3g} mm, "
            f"rotation error {res.rotation_error:.3g} rad)",
            q=res.q,
            residual=max(res.position_error, res.rotation_error),
        )
    q = _wrap_into_limits(arm, res.q, seed)
    diags = within_limits(arm, q)
    if diags:
        raise LimitViolation("; ".join(str(d) for d in diags), q=q, diagnostics=diags)
    return q
