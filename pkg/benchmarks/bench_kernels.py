"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints per-call times for each kernel and an end-to-end IK timing.
"""

import argparse
import timeit

import numpy as np

from bendolp import _kernels_py, kernels, kinematics


def bench(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled is None:
        print("compiled kernels are not available (build with `pip install -e . --no-build-isolation`)")
        return 1

    arm = kinematics.load_arm()
    rng = np.random.default_rng(0)
    q = np.radians(rng.uniform(-90, 90, 6))
    target = kinematics.forward_matrix(arm, np.degrees(q) + 3.0)
    pts = rng.uniform(-500, 500, (5000, 3))
    lo, hi = np.array([-100.0, -100.0, 0.0]), np.array([100.0, 100.0, 300.0])
    cur = kinematics.forward_matrix(arm, np.degrees(q))

    cases = [
        ("fk", lambda m: m.fk(arm._dh, q, arm._base, arm._tool), 2000),
        ("jacobian", lambda m: m.jacobian(arm._dh, q, arm._base, arm._tool, 1e-6), 500),
        ("pose_error", lambda m: m.pose_error(cur, target), 2000),
        ("point_box_sd x5000", lambda m: m.point_box_sd(pts, lo, hi), 50),
    ]
    print(f"{'kernel':<22}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for name, call, number in cases:
        tp = bench(lambda: call(_kernels_py), args.repeat, number) * 1e6
        tc = bench(lambda: call(kernels.compiled), args.repeat, number) * 1e6
        print(f"{name:<22}{tp:>12.2f}{tc:>14.2f}{tp / tc:>9.1f}x")

    # whole IK solves, switching the backend the solver uses
    seeds = rng.uniform(-60, 60, (50, 6))
    seeds[:, 4] = -45.0
    targets = [kinematics.forward(arm, s + 4.0) for s in seeds]

    def solve_all():
        for s, t in zip(seeds, targets):
            kinematics.solve_ik(arm, t, s)

    times = {}
    saved = (kernels.fk, kernels.jacobian, kernels.pose_error)
    for label, mod in (("python", _kernels_py), ("compiled", kernels.compiled)):
        kernels.fk, kernels.jacobian, kernels.pose_error = mod.fk, mod.jacobian, mod.pose_error
        times[label] = bench(solve_all, args.repeat, 1) / len(seeds) * 1e3
    kernels.fk, kernels.jacobian, kernels.pose_error = saved
    print(f"{'solve_ik (ms/solve)':<22}{times['python']:>12.3f}{times['compiled']:>14.3f}"
          f"{times['python'] / times['compiled']:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
