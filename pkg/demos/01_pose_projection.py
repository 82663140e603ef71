"""Project future walking poses into a camera frame.

A walker moves along a straight line on flat ground.  For an early frame we
drop each future pose onto the ground (subtracting the rig height), express
it in that frame's camera coordinates and project it through the pinhole
model.  The projected dots march up the image toward the horizon.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from travmap import geometry as geo

# forward-looking walker: camera x right, y down, z forward along world +x
R = np.column_stack([(0, -1, 0), (0, 0, -1), (1, 0, 0)])
trajectory = [
    geo.Pose(R, np.array([0.35 * i, 0.0, 1.5]), timestamp=0.35 * i) for i in range(80)
]

K = geo.CameraIntrinsics(fx=320, fy=320, cx=320, cy=240, width=640, height=480)
rig = geo.RigConfig(height_above_ground=1.5)  # horizon_poses defaults to 40

pixels = geo.project_future_path(trajectory, frame_index=0, K=K, rig=rig)
print(f"{len(pixels)} of the next {rig.horizon_poses} poses project inside the frame")
print(f"first pixel: ({pixels[0].u:.1f}, {pixels[0].v:.1f})  "
      f"last: ({pixels[-1].u:.1f}, {pixels[-1].v:.1f})")

vs = [p.v for p in pixels]
assert all(b <= a for a, b in zip(vs, vs[1:])), "path should recede toward the horizon"

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.scatter([p.u for p in pixels], vs, c=range(len(pixels)), cmap="viridis", s=18)
ax.set_xlim(0, K.width)
ax.set_ylim(K.height, 0)
ax.set_xlabel("u [px]")
ax.set_ylabel("v [px]")
ax.set_title("future walking poses projected into frame 0")
fig.savefig("demo_pose_projection.png", dpi=110, bbox_inches="tight")
print("wrote demo_pose_projection.png")
