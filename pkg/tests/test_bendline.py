import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bendolp.bendline import assign_tooling_station, ladder_index, normalize_scene, normalize_to_real_line
from bendolp.errors import AmbiguousLadder, NoStation, UnmappablePose
from bendolp.geometry import Pose, rotation_from_euler
from bendolp.scene import PressBrakeSpec, ToolingStation, ToolModelPose, parse_scene, parse_step_label

BRAKE = PressBrakeSpec(pbh=800.0, dbl=600.0, nl=3, lwa=100.0, uwa=400.0)


def bend_tool(z, x=12.5, y=-3.25, name="step_2A"):
    return ToolModelPose(parse_step_label(name), Pose(rotation_from_euler((-90, 10, 5)), (x, y, z)))


def brute_force(z, brake):
    """Scan every ladder line; the window is open on both ends."""
    lo, hi = brake.pbh + brake.lwa, brake.pbh + brake.uwa
    hits = [n for n in range(brake.nl + 1) if lo < z - n * brake.dbl < hi]
    return hits


@pytest.mark.parametrize("z,new_z,n", [(1650.0, 1050.0, 1), (1050.0, 1050.0, 0), (2250.0, 1050.0, 2)])
def test_reference_cases(z, new_z, n):
    [out] = normalize_to_real_line([bend_tool(z)], BRAKE)
    assert out.updated_z == new_z
    assert out.ladder_index == n


def test_window_is_open():
    for z in (900.0, 1200.0, 1500.0):
        with pytest.raises(UnmappablePose, match="step_2A"):
            normalize_to_real_line([bend_tool(z)], BRAKE)


def test_beyond_ladder():
    with pytest.raises(UnmappablePose):
        ladder_index(800 + 250 + 4 * 600, BRAKE)


def test_ambiguous_ladder():
    brake = PressBrakeSpec(pbh=0.0, dbl=100.0, nl=2, lwa=0.0, uwa=100.0)
    assert ladder_index(150.0, brake) == 1
    with pytest.raises(AmbiguousLadder):
        # spacing narrower than the window: z = 130 lands inside on lines 1 and 2
        ladder_index(130.0, PressBrakeSpec(pbh=0.0, dbl=50.0, nl=2, lwa=0.0, uwa=100.0))


def test_non_bend_pass_through():
    tool = ToolModelPose(parse_step_label("step_1"), Pose(np.eye(3), (1.0, 2.0, 99999.0)))
    [out] = normalize_to_real_line([tool], BRAKE)
    assert out.ladder_index == 0 and out.pose is tool.pose


def test_preserves_x_y_rotation_bitwise():
    tool = bend_tool(1650.0, x=0.1 + 0.2, y=-1e-300)
    [out] = normalize_to_real_line([tool], BRAKE)
    p = out.pose
    assert p.rotation.tobytes() == tool.pose.rotation.tobytes()
    assert p.position[:2].tobytes() == tool.pose.position[:2].tobytes()


def test_idempotent():
    once = normalize_to_real_line([bend_tool(2250.0), bend_tool(1100.0)], BRAKE)
    twice = normalize_to_real_line([n.as_tool() for n in once], BRAKE)
    assert [n.updated_z for n in twice] == [n.updated_z for n in once]
    assert all(n.ladder_index == 0 for n in twice)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0, 3000),
    st.floats(0, 400),
    st.floats(1, 400),
    st.floats(0, 200),
    st.integers(0, 6),
    st.floats(-500, 6000),
)
def test_matches_brute_force(pbh, lwa, width, extra, nl, z):
    brake = PressBrakeSpec(pbh=pbh, dbl=width + extra, nl=nl, lwa=lwa, uwa=lwa + width)
    hits = brute_force(z, brake)
    if len(hits) == 1:
        [out] = normalize_to_real_line([bend_tool(z)], brake)
        assert out.ladder_index == hits[0]
        assert out.updated_z == (z - hits[0] * brake.dbl if hits[0] else z)
    elif not hits:
        with pytest.raises(UnmappablePose):
            normalize_to_real_line([bend_tool(z)], brake)
    else:
        with pytest.raises(AmbiguousLadder):
            normalize_to_real_line([bend_tool(z)], brake)


def test_station_half_open():
    stations = [ToolingStation("S", -100.0, 0.0), ToolingStation("T", 0.0, 100.0)]
    assert assign_tooling_station(bend_tool(1050.0, x=-100.0), stations) == "S"
    assert assign_tooling_station(bend_tool(1050.0, x=0.0), stations) == "T"
    with pytest.raises(NoStation):
        assign_tooling_station(bend_tool(1050.0, x=100.0), stations)


def test_example_scene_normalization(example_scene):
    steps = normalize_scene(example_scene)
    by_name = {s.name: s for s in steps}
    assert [s.name for s in steps][:4] == ["step_1", "step_2F", "step_3A", "step_3B"]
    assert by_name["step_4A"].ladder_index == 1 and by_name["step_4A"].updated_z == 1050.0
    assert by_name["step_6A"].ladder_index == 3 and by_name["step_6A"].updated_z == 1110.0
    assert by_name["step_3A"].station_id == "S1" and by_name["step_5A"].station_id == "S2"
    assert by_name["step_1"].station_id is None
