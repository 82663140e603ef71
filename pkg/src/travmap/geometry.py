"""Rig poses, camera intrinsics and projection of future trajectory poses.

Conventions used throughout the package:

* World frame is right-handed with a gravity-aligned +z axis (up).
* A pose stores the rig-to-world transform: ``x_world = R @ x_device + t``,
  i.e. the columns of ``R`` are the device axes expressed in world frame.
* Device/camera frame is the usual computer-vision one: x right, y down,
  z forward along the optical axis.
* Pixel coordinates (u, v) are continuous; u grows with columns, v with rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, MissingInputError

DEFAULT_HORIZON_POSES = 40
DEFAULT_MIN_FORWARD_DEPTH = 0.1
DEFAULT_TIME_TOLERANCE = 0.05

_ORTHO_TOL = 1e-9


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Pose:
    """Rigid transform of the rig in the world frame at one timestamp."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {t.shape}")
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity(timestamp: float = 0.0) -> "Pose":
        return Pose(np.eye(3), np.zeros(3), timestamp)

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(Rt, -(Rt @ self.translation), self.timestamp)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: result maps other's device frame to
        this pose's world frame (``T_self * T_other``)."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            self.timestamp,
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width):
            raise ValueError("cx must lie in [0, width)")
        if not (0 <= self.cy < self.height):
            raise ValueError("cy must lie in [0, height)")

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RigConfig:
    """Static rig parameters used when projecting future poses."""

    height_above_ground: float
    horizon_poses: int = DEFAULT_HORIZON_POSES
    min_forward_depth: float = DEFAULT_MIN_FORWARD_DEPTH
    camera_extrinsic: Optional[Pose] = None  # camera pose in the body frame

    def __post_init__(self):
        if self.height_above_ground <= 0:
            raise ValueError("height_above_ground must be positive")
        if self.horizon_poses < 1:
            raise ValueError("horizon_poses must be >= 1")
        if self.min_forward_depth <= 0:
            raise ValueError("min_forward_depth must be positive")


@dataclass(frozen=True)
class PixelCoord:
    """Sub-pixel image coordinate (u along columns, v along rows)."""

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("pixel coordinates must be finite")

    def in_bounds(self, K: CameraIntrinsics) -> bool:
        return 0.0 <= self.u < K.width and 0.0 <= self.v < K.height


# ---------------------------------------------------------------------------
# Quaternion helpers (TUM files store [qx, qy, qz, qw])


def quat_to_rotmat(qx: float, qy: float, qz: float, qw: float) -> np.ndarray:
    """Unit-normalizes the quaternion and returns the 3x3 rotation matrix."""
    n = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
    if n == 0.0:
        raise ValueError("zero quaternion")
    x, y, z, w = qx / n, qy / n, qz / n, qw / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Returns [qx, qy, qz, qw] for an orthonormal R (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        qw = 0.25 * s
        qx = (R[2, 1] - R[1, 2]) / s
        qy = (R[0, 2] - R[2, 0]) / s
        qz = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        qx = 0.25 * s
        qy = (R[0, 1] + R[1, 0]) / s
        qz = (R[0, 2] + R[2, 0]) / s
        qw = (R[2, 1] - R[1, 2]) / s
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        qx = (R[0, 1] + R[1, 0]) / s
        qy = 0.25 * s
        qz = (R[1, 2] + R[2, 1]) / s
        qw = (R[0, 2] - R[2, 0]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        qx = (R[0, 2] + R[2, 0]) / s
        qy = (R[1, 2] + R[2, 1]) / s
        qz = 0.25 * s
        qw = (R[1, 0] - R[0, 1]) / s
    return np.array([qx, qy, qz, qw])


# ---------------------------------------------------------------------------
# Core transforms


def device_to_world(pose: Pose, point_device) -> np.ndarray:
    """Maps a device-frame point into the world frame."""
    return pose.rotation @ _as_vec3(point_device) + pose.translation


def world_to_device(pose: Pose, point_world) -> np.ndarray:
    """Maps a world-frame point into the device frame (inverse transform)."""
    return pose.rotation.T @ (_as_vec3(point_world) - pose.translation)


def ground_project(point_world, rig: RigConfig) -> np.ndarray:
    """Drops a world point onto the walked ground surface by subtracting the
    rig height from its gravity-aligned z coordinate."""
    p = _as_vec3(point_world)
    return np.array([p[0], p[1], p[2] - rig.height_above_ground])


def project_to_pixel(
    point_device, K: CameraIntrinsics, min_depth: float = 0.0
) -> Optional[PixelCoord]:
    """Projects a device-frame point through the pinhole model.

    Returns None as the behind-camera marker when z <= min_depth.  A
    returned PixelCoord may still lie outside the image; check with
    ``in_bounds`` (the two conditions are deliberately distinct).
    """
    p = _as_vec3(point_device)
    z = p[2]
    if z <= min_depth:
        return None
    return PixelCoord(K.fx * p[0] / z + K.cx, K.fy * p[1] / z + K.cy)


def camera_pose(pose: Pose, rig: RigConfig) -> Pose:
    """Camera pose in world frame, applying the optional body-to-camera offset."""
    if rig.camera_extrinsic is None:
        return pose
    return pose.compose(rig.camera_extrinsic)


def project_future_path(
    trajectory: Sequence[Pose],
    frame_index: int,
    K: CameraIntrinsics,
    rig: RigConfig,
) -> list[PixelCoord]:
    """Projects the next ``rig.horizon_poses`` pose positions into frame i.

    Each future pose translation is dropped to ground level, transformed
    into frame i's camera frame and projected; only points in front of the
    camera (z > min_forward_depth) and inside the image survive.  Order
    follows the trajectory.  An empty list is a valid result.
    """
    if not 0 <= frame_index < len(trajectory):
        raise IndexError(
            f"frame_index {frame_index} out of range for {len(trajectory)} poses"
        )
    cam = camera_pose(trajectory[frame_index], rig)
    future = trajectory[frame_index + 1 : frame_index + 1 + rig.horizon_poses]
    pixels: list[PixelCoord] = []
    for pose in future:
        ground = ground_project(pose.translation, rig)
        p_dev = world_to_device(cam, ground)
        px = project_to_pixel(p_dev, K, min_depth=rig.min_forward_depth)
        if px is not None and px.in_bounds(K):
            pixels.append(px)
    return pixels


# ---------------------------------------------------------------------------
# File I/O: TUM trajectories, intrinsics, frame lists, path pixels


def load_trajectory(path) -> list[Pose]:
    """Reads a TUM-format trajectory: `timestamp tx ty tz qx qy qz qw` per
    line, `#` comments ignored.  Poses are returned sorted by timestamp."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"trajectory file not found: {path}")
    poses = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise FormatError(
                f"{path}:{lineno}: expected 8 fields (t tx ty tz qx qy qz qw), "
                f"got {len(parts)}"
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric field") from exc
        ts, tx, ty, tz, qx, qy, qz, qw = vals
        poses.append(Pose(quat_to_rotmat(qx, qy, qz, qw), np.array([tx, ty, tz]), ts))
    poses.sort(key=lambda p: p.timestamp)
    return poses


def save_trajectory(poses: Sequence[Pose], path) -> None:
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for p in poses:
        q = rotmat_to_quat(p.rotation)
        t = p.translation
        lines.append(
            f"{p.timestamp:.6f} {t[0]:.9g} {t[1]:.9g} {t[2]:.9g} "
            f"{q[0]:.12g} {q[1]:.12g} {q[2]:.12g} {q[3]:.12g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


_INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def load_intrinsics(path) -> CameraIntrinsics:
    """Reads flat key-value intrinsics (one `key value` pair per line)."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"intrinsics file not found: {path}")
    values: dict[str, float] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("=", " ").split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected `key value`")
        key, val = parts
        try:
            values[key] = float(val)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric value for {key}") from exc
    missing = [k for k in _INTRINSIC_KEYS if k not in values]
    if missing:
        raise FormatError(f"{path}: missing intrinsics keys: {', '.join(missing)}")
    return CameraIntrinsics(
        fx=values["fx"],
        fy=values["fy"],
        cx=values["cx"],
        cy=values["cy"],
        width=int(values["width"]),
        height=int(values["height"]),
    )


def save_intrinsics(K: CameraIntrinsics, path) -> None:
    Path(path).write_text(
        "".join(
            f"{k} {getattr(K, k):.10g}\n" if k in ("fx", "fy", "cx", "cy") else f"{k} {getattr(K, k)}\n"
            for k in _INTRINSIC_KEYS
        )
    )


def associate_frames(
    trajectory: Sequence[Pose],
    frame_times: Sequence[float],
    tolerance: float = DEFAULT_TIME_TOLERANCE,
) -> list[Optional[int]]:
    """For each frame timestamp, index of the nearest pose within tolerance,
    or None when no pose matches (that frame is skipped downstream)."""
    times = np.array([p.timestamp for p in trajectory])
    out: list[Optional[int]] = []
    for ft in frame_times:
        if len(times) == 0:
            out.append(None)
            continue
        i = int(np.argmin(np.abs(times - ft)))
        out.append(i if abs(times[i] - ft) <= tolerance else None)
    return out


def load_frame_list(path) -> list[tuple[str, float]]:
    """Reads a frame list: `frame_id timestamp` per line, `#` comments ignored."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"frame list not found: {path}")
    frames = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected `frame_id timestamp`")
        try:
            frames.append((parts[0], float(parts[1])))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad timestamp") from exc
    return frames


def save_path_pixels(pixels: Sequence[PixelCoord], path) -> None:
    lines = ["# u v"] + [f"{p.u:.6f} {p.v:.6f}" for p in pixels]
    Path(path).write_text("\n".join(lines) + "\n")


def load_path_pixels(path) -> list[PixelCoord]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"path-pixel file not found: {path}")
    pixels = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected `u v`")
        pixels.append(PixelCoord(float(parts[0]), float(parts[1])))
    return pixels
