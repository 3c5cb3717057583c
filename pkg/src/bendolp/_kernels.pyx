# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: FK chain, numeric Jacobian, pose error, point/box distance.

Same signatures and semantics as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, atan2, fabs

cnp.import_array()


cdef inline void _mul4(double* a, double* b, double* out) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(4):
        for j in range(4):
            s = 0.0
            for k in range(4):
                s += a[i * 4 + k] * b[k * 4 + j]
            out[i * 4 + j] = s


cdef inline void _copy16(double* src, double* dst) noexcept nogil:
    cdef int i
    for i in range(16):
        dst[i] = src[i]


cdef void _fk(const double[:, ::1] dh, double* q, const double[:, ::1] base,
              const double[:, ::1] tool, double* out) noexcept nogil:
    cdef double m[16]
    cdef double t[16]
    cdef double r[16]
    cdef int i, n = dh.shape[0]
    cdef double ct, st, ca, sa, a, d
    for i in range(16):
        m[i] = base[i // 4, i % 4]
    for i in range(n):
        a = dh[i, 0]
        d = dh[i, 2]
        ct = cos(q[i] + dh[i, 3])
        st = sin(q[i] + dh[i, 3])
        ca = cos(dh[i, 1])
        sa = sin(dh[i, 1])
        t[0] = ct; t[1] = -st * ca; t[2] = st * sa; t[3] = a * ct
        t[4] = st; t[5] = ct * ca; t[6] = -ct * sa; t[7] = a * st
        t[8] = 0.0; t[9] = sa; t[10] = ca; t[11] = d
        t[12] = 0.0; t[13] = 0.0; t[14] = 0.0; t[15] = 1.0
        _mul4(m, t, r)
        _copy16(r, m)
    for i in range(16):
        t[i] = tool[i // 4, i % 4]
    _mul4(m, t, out)


cdef void _rot_log(const double* r, int stride, double* w) noexcept nogil:
    # r is a row-major 3x3 block with row stride `stride`
    cdef double vx = r[2 * stride + 1] - r[1 * stride + 2]
    cdef double vy = r[0 * stride + 2] - r[2 * stride + 0]
    cdef double vz = r[1 * stride + 0] - r[0 * stride + 1]
    cdef double s = 0.5 * sqrt(vx * vx + vy * vy + vz * vz)
    cdef double c = 0.5 * (r[0] + r[stride + 1] + r[2 * stride + 2] - 1.0)
    cdef double theta = atan2(s, c)
    cdef double f, sym[9], ax, ay, az, nrm, dk
    cdef int k, i
    if c > 0.0:
        if theta < 1e-8:
            f = 0.5
        else:
            f = theta / (2.0 * s)
        w[0] = f * vx; w[1] = f * vy; w[2] = f * vz
        return
    for i in range(3):
        sym[i * 3 + 0] = 0.5 * (r[i * stride + 0] + r[0 * stride + i])
        sym[i * 3 + 1] = 0.5 * (r[i * stride + 1] + r[1 * stride + i])
        sym[i * 3 + 2] = 0.5 * (r[i * stride + 2] + r[2 * stride + i])
        sym[i * 3 + i] -= c
    k = 0
    if sym[4] > sym[0]:
        k = 1
    if sym[8] > sym[k * 3 + k]:
        k = 2
    dk = sym[k * 3 + k]
    if dk < 1e-300:
        dk = 1e-300
    dk = sqrt(dk)
    ax = sym[0 * 3 + k] / dk
    ay = sym[1 * 3 + k] / dk
    az = sym[2 * 3 + k] / dk
    nrm = sqrt(ax * ax + ay * ay + az * az)
    ax /= nrm; ay /= nrm; az /= nrm
    if ax * vx + ay * vy + az * vz < 0.0:
        ax = -ax; ay = -ay; az = -az
    w[0] = theta * ax; w[1] = theta * ay; w[2] = theta * az


cdef inline void _rel_rot(double* a, double* b, double* out) noexcept nogil:
    # out = A[:3,:3] @ B[:3,:3]^T for 4x4 row-major A, B; out is 3x3
    cdef int i, j, k
    cdef double s
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += a[i * 4 + k] * b[j * 4 + k]
            out[i * 3 + j] = s


def fk(const double[:, ::1] dh, q, const double[:, ::1] base, const double[:, ::1] tool):
    cdef double[::1] qv = np.array(q, dtype=np.float64)
    out = np.empty((4, 4))
    cdef double[:, ::1] ov = out
    _fk(dh, &qv[0], base, tool, &ov[0, 0])
    return out


def jacobian(const double[:, ::1] dh, q, const double[:, ::1] base, const double[:, ::1] tool, double h):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qc = np.array(q, dtype=np.float64)
    cdef double* qp = <double*> qc.data
    cdef int n = dh.shape[0], k, i
    out = np.empty((6, n))
    cdef double[:, ::1] jv = out
    cdef double m0[16]
    cdef double mp[16]
    cdef double mm[16]
    cdef double rel[9]
    cdef double wp[3]
    cdef double wm[3]
    cdef double qk, inv = 1.0 / (2.0 * h)
    _fk(dh, qp, base, tool, m0)
    for k in range(n):
        qk = qp[k]
        qp[k] = qk + h
        _fk(dh, qp, base, tool, mp)
        qp[k] = qk - h
        _fk(dh, qp, base, tool, mm)
        qp[k] = qk
        for i in range(3):
            jv[i, k] = (mp[i * 4 + 3] - mm[i * 4 + 3]) * inv
        _rel_rot(mp, m0, rel)
        _rot_log(rel, 3, wp)
        _rel_rot(mm, m0, rel)
        _rot_log(rel, 3, wm)
        for i in range(3):
            jv[3 + i, k] = (wp[i] - wm[i]) * inv
    return out


def pose_error(const double[:, ::1] current, const double[:, ::1] target):
    cdef double rel[9]
    cdef double w[3]
    cdef int i, j, k
    cdef double s
    e = np.empty(6)
    cdef double[::1] ev = e
    for i in range(3):
        ev[i] = target[i, 3] - current[i, 3]
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += target[i, k] * current[j, k]
            rel[i * 3 + j] = s
    _rot_log(rel, 3, w)
    ev[3] = w[0]; ev[4] = w[1]; ev[5] = w[2]
    return e


def rot_log(rot):
    cdef const double[:, ::1] r = np.ascontiguousarray(rot, dtype=np.float64)
    cdef double w[3]
    _rot_log(&r[0, 0], 3, w)
    return np.array([w[0], w[1], w[2]])


def point_box_sd(points, lo, hi):
    cdef const double[:, ::1] p = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    cdef const double[::1] l = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    cdef int k
    cdef double d, dmax, acc
    out = np.empty(n)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            acc = 0.0
            dmax = -1e300
            for k in range(3):
                d = l[k] - p[i, k]
                if p[i, k] - u[k] > d:
                    d = p[i, k] - u[k]
                if d > dmax:
                    dmax = d
                if d > 0.0:
                    acc += d * d
            if dmax < 0.0:
                ov[i] = dmax
            else:
                ov[i] = sqrt(acc)
    return out
