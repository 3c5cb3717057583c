"""Collapse ladder (virtual bending line) poses onto the real bending line.

The press brake is drawn as a ladder: the real bending line plus ``nl``
virtual copies stacked ``dbl`` apart. A bend pose drawn on ladder line ``n``
is moved down by ``n * dbl`` so it lands in the working window
``(pbh + lwa, pbh + uwa)``. Only z changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

from .errors import AmbiguousLadder, NoStation, UnmappablePose
from .geometry import Pose
from .scene import CellScene, PressBrakeSpec, ToolingStation, ToolModelPose, ordered_steps


@dataclass(frozen=True)
class NormalizedPose:
    original: ToolModelPose
    updated_z: float
    ladder_index: int = 0
    station_id: Optional[str] = None

    @property
    def label(self):
        return self.original.label

    @property
    def name(self) -> str:
        return self.original.name

    @property
    def pose(self) -> Pose:
        """The tool pose with z replaced; x, y and rotation are the original arrays."""
        src = self.original.pose
        if self.ladder_index == 0:
            return src
        pos = src.position.copy()
        pos[2] = self.updated_z
        return Pose(src.rotation, pos)

    def as_tool(self) -> ToolModelPose:
        return ToolModelPose(self.original.label, self.pose)


def in_window(z: float, brake: PressBrakeSpec) -> bool:
    return (brake.pbh + brake.lwa) < z < (brake.pbh + brake.uwa)


def ladder_index(z: float, brake: PressBrakeSpec, name: str = "pose") -> int:
    """Ladder line ``n`` whose shift lands ``z`` strictly inside the working window."""
    hits = [n for n in range(0, brake.nl + 1) if in_window(z - n * brake.dbl, brake)]
    if not hits:
        lo, hi = brake.window
        raise UnmappablePose(
            f"{name}: z = {z:g} does not reach the working window ({lo:g}, {hi:g}) "
            f"on any of {brake.nl} ladder line(s)"
        )
    if len(hits) > 1:
        raise AmbiguousLadder(f"{name}: z = {z:g} matches ladder lines {hits}")
    return hits[0]


def normalize_to_real_line(
    tools: Sequence[ToolModelPose], brake: PressBrakeSpec
) -> List[NormalizedPose]:
    """Normalize every bend-phase pose; other phases pass through untouched.

    Output order follows the input order.
    """
    out = []
    for tool in tools:
        z = float(tool.pose.position[2])
        if not tool.label.phase.is_bend:
            out.append(NormalizedPose(tool, z, 0))
            continue
        n = ladder_index(z, brake, tool.name)
        out.append(NormalizedPose(tool, z - n * brake.dbl if n else z, n))
    return out


def assign_tooling_station(pose, stations: Sequence[ToolingStation]) -> str:
    """Id of the station whose half-open span ``[x_min, x_max)`` holds the pose's x."""
    p = pose.pose if isinstance(pose, (NormalizedPose, ToolModelPose)) else pose
    x = float(p.position[0])
    for st in stations:
        if st.x_min <= x < st.x_max:
            return st.id
    name = getattr(pose, "name", "pose")
    raise NoStation(f"{name}: x = {x:g} lies outside every tooling station")


def normalize_scene(scene: CellScene) -> List[NormalizedPose]:
    """Ordered steps, ladder-normalized, with bend poses mapped to stations.

    Station lookup is skipped when the scene declares no stations.
    """
    out = []
    for npose in normalize_to_real_line(ordered_steps(scene), scene.brake):
        if npose.label.phase.is_bend and scene.stations:
            sid = assign_tooling_station(npose, scene.stations)
            npose = NormalizedPose(npose.original, npose.updated_z, npose.ladder_index, sid)
        out.append(npose)
    return out
