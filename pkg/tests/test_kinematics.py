import math

import numpy as np
import pytest

from bendolp import geometry, kinematics
from bendolp.errors import LimitViolation, NoConvergence
from bendolp.kinematics import forward, forward_matrix, inverse, numeric_jacobian, solve_ik, within_limits

# FK(q = 0) of the bundled arm, from a 40-digit DH chain product done outside the package
FK_ZERO_POSITION = (1040.0, 0.0, 1260.0)
FK_ZERO_ROTATION = ((0.0, 0.0, 1.0), (0.0, -1.0, 0.0), (1.0, 0.0, 0.0))


def random_q(arm, rng, margin=10.0):
    lo, hi = arm.joint_limits[:, 0] + margin, arm.joint_limits[:, 1] - margin
    q = rng.uniform(lo, hi)
    # keep away from the wrist singularity
    q[4] = rng.choice([-1, 1]) * rng.uniform(15, 120)
    return q


def geometric_jacobian(arm, q):
    """Axis-cross-lever Jacobian from the chain frames (independent of the package's differencing)."""
    dh = arm.dh_rows
    m = arm.base.matrix
    origins, axes = [], []
    for (a, alpha, d, off), qi in zip(dh, q):
        origins.append(m[:3, 3].copy())
        axes.append(m[:3, 2].copy())
        th, al = math.radians(qi + off), math.radians(alpha)
        t = np.array(
            [
                [math.cos(th), -math.sin(th) * math.cos(al), math.sin(th) * math.sin(al), a * math.cos(th)],
                [math.sin(th), math.cos(th) * math.cos(al), -math.cos(th) * math.sin(al), a * math.sin(th)],
                [0, math.sin(al), math.cos(al), d],
                [0, 0, 0, 1],
            ]
        )
        m = m @ t
    p = (m @ arm.tool.matrix)[:3, 3]
    j = np.zeros((6, 6))
    for i in range(6):
        j[:3, i] = np.cross(axes[i], p - origins[i])
        j[3:, i] = axes[i]
    return j


def test_fk_zero_golden(arm):
    p = forward(arm, np.zeros(6))
    np.testing.assert_allclose(p.position, FK_ZERO_POSITION, atol=1e-9)
    np.testing.assert_allclose(p.rotation, FK_ZERO_ROTATION, atol=1e-12)


def test_fk_home(arm):
    np.testing.assert_allclose(forward(arm, arm.home).position, (915.0, 0.0, 1476.5063509461097), atol=1e-9)


def test_fk_periodic(arm, rng):
    for _ in range(20):
        q = random_q(arm, rng)
        for j in range(6):
            q2 = q.copy()
            q2[j] += 360.0
            np.testing.assert_allclose(forward_matrix(arm, q2), forward_matrix(arm, q), atol=1e-9)


def test_last_joint_keeps_tcp(arm, rng):
    q = random_q(arm, rng)
    q2 = q.copy()
    q2[5] += 73.0
    np.testing.assert_allclose(forward(arm, q2).position, forward(arm, q).position, atol=1e-9)


def test_jacobian_matches_geometric(arm, rng):
    for _ in range(30):
        q = random_q(arm, rng)
        np.testing.assert_allclose(numeric_jacobian(arm, q), geometric_jacobian(arm, q), atol=1e-5, rtol=1e-6)


def test_jacobian_singular_wrist(arm):
    q = np.array([10.0, 20.0, -30.0, 40.0, 0.0, 0.0])
    s = np.linalg.svd(numeric_jacobian(arm, q), compute_uv=False)
    assert s[-1] / s[0] < 1e-8
    s = np.linalg.svd(numeric_jacobian(arm, q + [0, 0, 0, 0, 30, 0]), compute_uv=False)
    assert s[-1] / s[0] > 1e-4


def test_ik_fixed_point(arm, rng):
    q0 = random_q(arm, rng)
    np.testing.assert_allclose(inverse(arm, forward(arm, q0), q0), q0, atol=1e-9)


def test_ik_round_trip(arm, rng):
    for _ in range(100):
        q = random_q(arm, rng)
        target = forward(arm, q)
        sol = inverse(arm, target, q + rng.uniform(-5, 5, 6))
        got = forward(arm, sol)
        assert np.linalg.norm(got.position - target.position) <= 1e-6
        assert geometry.rotation_distance(got.rotation, target.rotation) <= 1e-6


def test_ik_residual_decreases(arm, rng):
    q = random_q(arm, rng)
    res = solve_ik(arm, forward(arm, q), q + 8.0)
    assert res.converged
    assert all(b < a for a, b in zip(res.residuals, res.residuals[1:]))


def test_unreachable(arm):
    target = geometry.Pose(np.eye(3), (10000.0, 0.0, 0.0))
    with pytest.raises(NoConvergence):
        inverse(arm, target)


def test_limit_violation(arm):
    q = np.array([0.0, 0.0, 0.0, 0.0, -60.0, 0.0])
    narrow = kinematics.ArmModel(
        arm.dh_rows, np.array([[-5, 5]] * 4 + [[-50, 50], [-5, 5]], dtype=float), arm.base, arm.tool, (0,) * 6
    )
    with pytest.raises(LimitViolation) as info:
        inverse(narrow, forward(arm, q), q)
    assert [d.joint for d in info.value.diagnostics] == [5]


def test_within_limits(arm):
    mid = arm.joint_limits.mean(axis=1)
    assert within_limits(arm, mid) == []
    q = mid.copy()
    q[0] = arm.joint_limits[0, 1]
    assert within_limits(arm, q) == []
    q[0] += 0.1
    [d] = within_limits(arm, q)
    assert d.joint == 1 and "joint 1" in str(d)


def test_wrap_nearest_seed(arm):
    q = kinematics._wrap_into_limits(arm, np.array([0, 0, 0, 0, 0, 350.0]), [0, 0, 0, 0, 0, -5.0])
    assert q[5] == pytest.approx(-10.0)


def test_arm_errors():
    with pytest.raises(kinematics.ArmModelError):
        kinematics.arm_from_dict({"dh_rows": [[0, 0, 0, 0]] * 5, "joint_limits": [[-1, 1]] * 6})
    with pytest.raises(kinematics.ArmModelError):
        kinematics.arm_from_dict({"dh_rows": [[0, 0, 0, 0]] * 6, "joint_limits": [[1, -1]] * 6})
