import numpy as np
import pytest

from hitl_sgraph.geometry import Pose
from hitl_sgraph.scene_graph import PlaneObservation, SceneGraph

# world geometry of a wall: (normal, offset, extent center, half_u, half_v)
RECT_WALLS_4X6 = [
    (np.array([1.0, 0.0, 0.0]), 0.0, np.array([0.0, 3.0, 1.5]), 3.0, 1.5),
    (np.array([-1.0, 0.0, 0.0]), 4.0, np.array([4.0, 3.0, 1.5]), 3.0, 1.5),
    (np.array([0.0, 1.0, 0.0]), 0.0, np.array([2.0, 0.0, 1.5]), 2.0, 1.5),
    (np.array([0.0, -1.0, 0.0]), 6.0, np.array([2.0, 6.0, 1.5]), 2.0, 1.5),
]


def observations_of(pose: Pose, walls) -> list[PlaneObservation]:
    """Noiseless body-frame observations of world walls from a pose."""
    R = pose.rotation_matrix()
    inv = pose.inverse()
    out = []
    for n_w, d_w, center, half_u, half_v in walls:
        out.append(PlaneObservation(
            normal=R.T @ n_w,
            offset=d_w + float(n_w @ pose.t),
            extent_center=inv.transform(center),
            half_u=half_u,
            half_v=half_v,
        ))
    return out


@pytest.fixture
def room_graph() -> SceneGraph:
    """Graph with one keyframe observing the four walls of [0,4]x[0,6]."""
    graph = SceneGraph()
    pose = Pose.from_xy_yaw(2.0, 3.0, 0.0)
    graph.add_keyframe(pose, 0.0, observations_of(pose, RECT_WALLS_4X6))
    return graph
