"""Export a cost-annotated point cloud for a local planner.

Renders a depth image from a synthetic scene, pairs it with a cost map,
unprojects every valid pixel and writes an ASCII PLY.  Points nearer than
2 m are dropped so momentary close-range occlusions cannot wall the robot in.
"""

import numpy as np

from travmap import cloudexport as ce
from travmap import costmap as cm
from travmap import synthgen as sg
from travmap.geometry import CameraIntrinsics, Pose

field = sg.Heightfield(np.zeros((60, 60)), np.zeros((60, 60), int), cell_size=0.5)
field.elevation[30:34, 36:40] = 1.2  # a boulder ahead
classes = {0: sg.ClassDef(0, "ground", True, (120, 120, 120))}

K = CameraIntrinsics(fx=160, fy=160, cx=80, cy=60, width=160, height=120)
cam = Pose(
    np.column_stack([(0, -1, 0), (0, 0, -1), (1, 0, 0)]),
    np.array([8.0, 16.0, 1.4]),
)
frame = sg.render_views(field, [cam], K, classes)[0]
print(f"depth image: {int(frame.depth.valid().sum())} valid pixels, "
      f"max {frame.depth.values.max():.1f} m")

# pretend the boulder area is costly, the rest cheap
cost_vals = np.full(frame.depth.shape, 0.1, np.float32)
cost_vals[frame.depth.values > 6.0] = 0.8
cost = cm.CostMap(cost_vals)

cloud = ce.build_cost_cloud(cost, frame.depth, K, min_range=2.0)
ranges = np.linalg.norm(cloud.points[:, :3], axis=1)
print(f"{len(cloud)} points, nearest at {ranges.min():.2f} m (floor 2.0 m)")

ce.write_cloud(cloud, "demo_cloud.ply")
back = ce.read_cloud("demo_cloud.ply")
assert len(back) == len(cloud)
print("wrote demo_cloud.ply (ASCII, properties x y z cost)")
