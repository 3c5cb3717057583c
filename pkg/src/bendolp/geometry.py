"""Rigid-transform algebra and Euler-angle conversion.

Euler angles follow the extrinsic X-Y-Z convention, i.e. ``R = Rz(rz) @ Ry(ry) @ Rx(rx)``.
Angles cross every public boundary in degrees; internal math is in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import NonOrthonormal

ORTHO_TOL = 1e-9
REPAIR_TOL = 1e-6
GIMBAL_TOL = 1e-7  # rad, distance of |ry| from 90 deg treated as gimbal lock

Cartesian = Tuple[float, float, float, float, float, float]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: ``rotation`` (3x3) and ``position`` (mm)."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        rot = _frozen(self.rotation)
        pos = _frozen(self.position)
        if rot.shape != (3, 3) or pos.shape != (3,):
            raise ValueError("Pose needs a 3x3 rotation and a 3-vector position")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "position", pos)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_euler(cls, position, euler_deg) -> "Pose":
        return cls(rotation_from_euler(euler_deg), position)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.position
        return m

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.position, other.position, rtol=0.0, atol=atol)
        )

    def __repr__(self):
        return f"Pose(position={self.position.tolist()}, rotation={self.rotation.tolist()})"


def orthonormality_error(rot) -> float:
    rot = np.asarray(rot, dtype=float)
    return float(np.max(np.abs(rot.T @ rot - np.eye(3))))


def orthonormalize(rot) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(np.asarray(rot, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def checked_rotation(rot, repair_tol: float = REPAIR_TOL) -> np.ndarray:
    """Return ``rot`` untouched if orthonormal, repaired if within ``repair_tol``.

    Raises NonOrthonormal when the matrix is further than ``repair_tol`` from
    a rotation or is a reflection.
    """
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
        raise NonOrthonormal("rotation must be a finite 3x3 matrix")
    err = orthonormality_error(rot)
    if err > repair_tol:
        raise NonOrthonormal(f"rotation is not orthonormal (max|R^T R - I| = {err:.3g})")
    if np.linalg.det(rot) < 0:
        raise NonOrthonormal("rotation has determinant -1 (reflection)")
    if err > ORTHO_TOL:
        return orthonormalize(rot)
    return rot


def compose(a: Pose, b: Pose) -> Pose:
    """``a @ b``: the pose ``b`` (given in a's frame) expressed in a's parent frame."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.position + a.position)


def invert(p: Pose) -> Pose:
    rt = p.rotation.T
    return Pose(rt, -(rt @ p.position))


def relative_pose(base: Pose, target: Pose) -> Pose:
    """Re-express a world-frame ``target`` in the frame of ``base``."""
    return compose(invert(base), target)


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_euler(e) -> np.ndarray:
    """Rotation ``Rz @ Ry @ Rx`` from (rx, ry, rz) in degrees."""
    rx, ry, rz = (math.radians(float(v)) for v in e)
    return _rz(rz) @ _ry(ry) @ _rx(rx)


def _canonical_deg(a: float) -> float:
    d = math.degrees(a)
    if d <= -180.0:
        d += 360.0
    return d + 0.0


def euler_from_rotation(rot) -> Tuple[float, float, float]:
    """Extract (rx, ry, rz) degrees with rx, rz in (-180, 180] and ry in [-90, 90].

    At gimbal lock rx is pinned to 0 and the free angle goes into rz.
    """
    r = checked_rotation(rot)
    ry = math.atan2(-r[2, 0], math.hypot(r[0, 0], r[1, 0]))
    if abs(abs(ry) - math.pi / 2) <= GIMBAL_TOL:
        rx = 0.0
        # with rx = 0: R = Rz @ Ry, so R[0,1] = -sin(rz), R[1,1] = cos(rz)
        rz = math.atan2(-r[0, 1], r[1, 1])
    else:
        rx = math.atan2(r[2, 1], r[2, 2])
        rz = math.atan2(r[1, 0], r[0, 0])
    return (_canonical_deg(rx), math.degrees(ry) + 0.0, _canonical_deg(rz))


def skew(w) -> np.ndarray:
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_log(rot) -> np.ndarray:
    """Axis-angle vector (rad) of a rotation matrix, accurate for all angles."""
    r = np.asarray(rot, dtype=float)
    v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    s = 0.5 * float(np.linalg.norm(v))
    c = 0.5 * (float(np.trace(r)) - 1.0)
    theta = math.atan2(s, c)
    if c > 0.0:
        if theta < 1e-8:
            return 0.5 * v
        return (theta / (2.0 * s)) * v
    # theta ≥ 90 deg: axis from the symmetric part, sign from the skew part
    sym = 0.5 * (r + r.T) - c * np.eye(3)
    k = int(np.argmax(np.diag(sym)))
    axis = sym[:, k] / math.sqrt(max(sym[k, k], 1e-300))
    axis /= np.linalg.norm(axis)
    if axis @ v < 0.0:
        axis = -axis
    return theta * axis


def rotation_exp(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    k = skew(w)
    if theta < 1e-12:
        return np.eye(3) + k
    return np.eye(3) + (math.sin(theta) / theta) * k + ((1.0 - math.cos(theta)) / theta**2) * (k @ k)


def rotation_distance(a, b) -> float:
    """Geodesic angle (rad) between two rotations."""
    return float(np.linalg.norm(rotation_log(np.asarray(b) @ np.asarray(a).T)))


def slerp(r0, r1, s: float) -> np.ndarray:
    """Shortest-arc interpolation between rotations, ``s`` in [0, 1]."""
    r0 = np.asarray(r0, dtype=float)
    w = rotation_log(r0.T @ np.asarray(r1, dtype=float))
    return r0 @ rotation_exp(s * w)


def to_cartesian(p: Pose) -> Cartesian:
    """(x, y, z, rx, ry, rz) with angles in degrees."""
    x, y, z = (float(v) for v in p.position)
    return (x, y, z) + euler_from_rotation(p.rotation)


def from_cartesian(c) -> Pose:
    return Pose(rotation_from_euler(c[3:6]), c[0:3])
