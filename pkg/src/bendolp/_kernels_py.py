"""Pure-Python kernels. Reference semantics for the compiled ``_kernels`` module.

DH tables are ``(6, 4)`` float arrays of ``[a mm, alpha rad, d mm, theta_offset rad]``;
joint vectors are radians.
"""

import math

import numpy as np

from .geometry import rotation_log


def dh_matrix(a, alpha, d, theta):
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def fk(dh, q, base, tool):
    m = np.array(base, dtype=float)
    for i in range(dh.shape[0]):
        a, alpha, d, off = dh[i]
        m = m @ dh_matrix(a, alpha, d, q[i] + off)
    return m @ tool


def jacobian(dh, q, base, tool, h):
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    j = np.empty((6, n))
    r0 = fk(dh, q, base, tool)[:3, :3]
    for k in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[k] += h
        qm[k] -= h
        mp = fk(dh, qp, base, tool)
        mm = fk(dh, qm, base, tool)
        j[:3, k] = (mp[:3, 3] - mm[:3, 3]) / (2.0 * h)
        wp = rotation_log(mp[:3, :3] @ r0.T)
        wm = rotation_log(mm[:3, :3] @ r0.T)
        j[3:, k] = (wp - wm) / (2.0 * h)
    return j


def pose_error(current, target):
    """``[target_p - p, log(R_t R^T)]`` for two 4x4 transforms."""
    e = np.empty(6)
    e[:3] = target[:3, 3] - current[:3, 3]
    e[3:] = rotation_log(target[:3, :3] @ current[:3, :3].T)
    return e


def rot_log(rot):
    return rotation_log(rot)


def point_box_sd(points, lo, hi):
    """Signed distance from each point to an axis-aligned box (negative inside)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = np.maximum(lo - p, p - hi)
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.minimum(np.max(d, axis=1), 0.0)
    return outside + inside
