"""Core geometric types: point clouds, oriented boxes, labeled frames.

Conventions used throughout the package:

* Coordinates are metric, right-handed, z-up.  The sensor sits near the
  origin and looks out over the xy plane.
* An oriented box is parameterized by its center ``(cx, cy, cz)``, its full
  extents ``(length, width, height)`` and a yaw angle (rotation about z,
  counter-clockwise, radians).  ``length`` runs along the box's local x axis.
* Point clouds are ``(N, 3)`` float arrays plus an optional per-point
  intensity channel.  Generated and file-loaded clouds are float32; codec
  reconstructions keep float64 so round-trip error bounds are not blurred
  by an extra rounding step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "ClassLabel",
    "Point3",
    "PointCloud",
    "Box3D",
    "LabeledFrame",
    "points_in_box",
    "wrap_angle",
]

TWO_PI = 2.0 * math.pi


class ClassLabel(enum.IntEnum):
    """Object classes known to the generator, detector and evaluator."""

    CAR = 0
    PEDESTRIAN = 1


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Point3:
    """A single metric point; mostly a convenience for tests and docs."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


class PointCloud:
    """A bag of 3D points with an optional intensity channel.

    Parameters
    ----------
    xyz:
        ``(N, 3)`` array of coordinates.  float32 and float64 are accepted and
        preserved; anything else is cast to float32.
    intensity:
        Optional ``(N,)`` float32 array in [0, 1].  ``None`` means the channel
        is absent (codec reconstructions drop it).
    sensor_origin:
        Where the sensor sat when this cloud was captured, used by consumers
        that reason about viewing direction.  Defaults to the origin.
    """

    __slots__ = ("xyz", "intensity", "sensor_origin")

    def __init__(
        self,
        xyz: np.ndarray,
        intensity: np.ndarray | None = None,
        sensor_origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ) -> None:
        xyz = np.asarray(xyz)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ConfigError(f"point array must be (N, 3), got {xyz.shape}")
        if xyz.dtype not in (np.float32, np.float64):
            xyz = xyz.astype(np.float32)
        self.xyz = np.ascontiguousarray(xyz)
        if intensity is not None:
            intensity = np.ascontiguousarray(intensity, dtype=np.float32)
            if intensity.shape != (len(xyz),):
                raise ConfigError(
                    f"intensity must be ({len(xyz)},), got {intensity.shape}"
                )
        self.intensity = intensity
        self.sensor_origin = (
            float(sensor_origin[0]),
            float(sensor_origin[1]),
            float(sensor_origin[2]),
        )

    def __len__(self) -> int:
        return len(self.xyz)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, dtype={self.xyz.dtype})"

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (min, max) corners as float64; zeros when empty."""
        if len(self) == 0:
            zero = np.zeros(3, dtype=np.float64)
            return zero, zero.copy()
        xyz64 = self.xyz.astype(np.float64, copy=False)
        return xyz64.min(axis=0), xyz64.max(axis=0)


@dataclass(frozen=True)
class Box3D:
    """An oriented 3D bounding box (see module docstring for conventions)."""

    cx: float
    cy: float
    cz: float
    length: float
    width: float
    height: float
    yaw: float

    def __post_init__(self) -> None:
        for name in ("length", "width", "height"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigError(f"box {name} must be finite and > 0, got {value}")
        if not math.isfinite(self.yaw):
            raise ConfigError(f"box yaw must be finite, got {self.yaw}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.cz], dtype=np.float64)

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height

    def corners_bev(self) -> np.ndarray:
        """The four footprint corners in the xy plane, counter-clockwise."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array(
            [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]], dtype=np.float64
        )
        rot = np.array([[c, -s], [s, c]], dtype=np.float64)
        return local @ rot.T + np.array([self.cx, self.cy])

    def z_interval(self) -> tuple[float, float]:
        half = 0.5 * self.height
        return self.cz - half, self.cz + half

    def as_vector(self) -> np.ndarray:
        """(cx, cy, cz, length, width, height, yaw) as float64."""
        return np.array(
            [self.cx, self.cy, self.cz, self.length, self.width, self.height, self.yaw],
            dtype=np.float64,
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "Box3D":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (7,):
            raise ConfigError(f"box vector must have 7 entries, got {vec.shape}")
        return cls(*(float(v) for v in vec))


@dataclass
class LabeledFrame:
    """A point cloud plus its ground-truth boxes and class labels.

    ``occluded[i]`` marks boxes that ended up with fewer than the generator's
    visibility floor of points inside them (hidden behind another object, or
    simply too far away for the scan pattern).  Evaluation may treat such
    boxes as unmatchable.  When omitted it defaults to all-visible.
    """

    frame_id: int
    cloud: PointCloud
    boxes: list[Box3D] = field(default_factory=list)
    labels: list[ClassLabel] = field(default_factory=list)
    occluded: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.boxes) != len(self.labels):
            raise ConfigError(
                f"{len(self.boxes)} boxes but {len(self.labels)} labels"
            )
        if not self.occluded:
            self.occluded = [False] * len(self.boxes)
        elif len(self.occluded) != len(self.boxes):
            raise ConfigError(
                f"{len(self.boxes)} boxes but {len(self.occluded)} occlusion flags"
            )

    def __len__(self) -> int:
        return len(self.cloud)


def points_in_box(cloud: PointCloud, box: Box3D, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of the cloud's points inside (or on) an oriented box.

    The test is closed: points exactly on a face count as inside, so a point
    cannot fall between two touching boxes.  ``margin`` inflates every half
    extent, which callers use to keep surface points that measurement noise
    nudged just outside the box.
    """
    if len(cloud) == 0:
        return np.zeros(0, dtype=bool)
    xyz = cloud.xyz.astype(np.float64, copy=False)
    dx = xyz[:, 0] - box.cx
    dy = xyz[:, 1] - box.cy
    dz = xyz[:, 2] - box.cz
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # Rotate the offsets into the box frame (inverse of the box rotation).
    local_x = c * dx + s * dy
    local_y = -s * dx + c * dy
    return (
        (np.abs(local_x) <= 0.5 * box.length + margin)
        & (np.abs(local_y) <= 0.5 * box.width + margin)
        & (np.abs(dz) <= 0.5 * box.height + margin)
    )
