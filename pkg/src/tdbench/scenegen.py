"""Deterministic synthetic LiDAR scenes with ground-truth boxes.

The sensor model is a spinning multi-channel LiDAR: ``lidar_channels``
elevation rings, each swept by ``points_per_channel`` uniform azimuth steps,
cast from a sensor mounted ``sensor_height`` above a flat ground plane.
Every ray keeps its nearest hit among the ground plane and the placed
objects; hits beyond ``max_range`` are dropped; Gaussian range noise then
displaces each return along its ray.  Distant or hidden objects naturally
collect few returns, which is exactly the sparsity a detector has to cope
with — boxes that end up with fewer than :data:`VISIBILITY_FLOOR` points in
the final cloud are flagged ``occluded``.

Determinism: a frame is a pure function of its :class:`SceneConfig`.  Object
placement consumes a sequential counter-based stream, range noise is indexed
by absolute ray number, and box parameters are snapped to float32 (the frame
file's precision) before use, so generate → save → load round-trips values
exactly and repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, SceneError
from .frameio import save_frame
from .geometry import Box3D, ClassLabel, LabeledFrame, PointCloud, points_in_box
from .rng import SequentialRng, derive_key, normal_array

__all__ = [
    "SceneConfig",
    "generate_scene",
    "generate_corpus",
    "load_manifest",
    "CAR_LENGTH_RANGE",
    "CAR_WIDTH_RANGE",
    "CAR_HEIGHT_RANGE",
    "PED_LENGTH_RANGE",
    "PED_HEIGHT_RANGE",
    "VISIBILITY_FLOOR",
]

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi

# Substream tags (arbitrary distinct constants).
_TAG_PLACEMENT = 0x504C4143  # object placement draws
_TAG_RANGE_NOISE = 0x4E4F4953  # per-ray range noise

# Class size ranges (meters).  Car and pedestrian lengths are disjoint on
# purpose: a size threshold separates the classes perfectly, which is what
# the baseline detector's classifier relies on.
CAR_LENGTH_RANGE = (3.5, 5.5)
CAR_WIDTH_RANGE = (1.6, 2.0)
CAR_HEIGHT_RANGE = (1.5, 2.1)  # sedan-to-SUV fleet mix
PED_LENGTH_RANGE = (0.4, 0.8)
PED_WIDTH_FRACTION = (0.6, 1.0)  # width = length * fraction (keeps w <= l)
PED_HEIGHT_RANGE = (1.5, 1.9)

# Placement rules.  Each class gets its own sensor-centered annulus instead
# of uniform placement over the whole area.  Cars stay in the near band
# where a 64-ring scan pattern returns enough points to support detection;
# pedestrians occupy the far band where — being far smaller targets — they
# collect only a handful of returns.  That asymmetry is the point: small
# objects living in the sparse-return regime is what separates the two
# classes for any geometry-driven detector, and placing pedestrians close
# enough to be densely sampled would invert it.  Ground returns still cover
# the full area, keeping frame statistics (point count, range span) at
# full scale.
_MIN_SENSOR_CLEARANCE = 3.0  # meters between sensor and nearest box edge
_MIN_OBJECT_CLEARANCE = 2.0  # meters between box footprint circles
_MAX_PLACE_ATTEMPTS = 100
_PLACEMENT_MIN_RANGE = 8.0  # meters from sensor to nearest object center
_CAR_BAND_FRACTIONS = (0.0, 0.6)  # annulus radii as shares of half-extent
_PED_BAND_FRACTIONS = (0.63, 0.9)

# A ground-truth box with fewer supporting returns than this is flagged
# occluded.  A return supports a box when the ray-caster attributed the hit
# to that object AND the stored (noise-displaced, float32) point still lies
# inside the exact box — so ground returns brushing a far object's footprint
# never inflate its count, and a visible box always contains at least this
# many points.
VISIBILITY_FLOOR = 10

# Intensity model: per-class albedo attenuated with range.  Purely
# decorative (nothing downstream keys on it) but deterministic.
_GROUND_ALBEDO = 0.25
_CLASS_ALBEDO = {ClassLabel.CAR: 0.85, ClassLabel.PEDESTRIAN: 0.45}
_INTENSITY_HALF_RANGE = 50.0  # meters at which intensity halves


@dataclass(frozen=True)
class SceneConfig:
    """Everything that determines a generated frame.

    The default scan pattern (64 channels from -24.8 to +2.0 degrees
    elevation, 1560 azimuth steps) yields roughly 91k returns per frame over
    a 200 m diameter area.
    """

    seed: int = 7
    n_cars: int = 12
    n_pedestrians: int = 10
    area_half_extent: float = 100.0
    lidar_channels: int = 64
    points_per_channel: int = 1560
    noise_sigma: float = 0.01
    sensor_height: float = 1.8
    max_range: float = 200.0
    elevation_low_deg: float = -24.8
    elevation_high_deg: float = 2.0

    def __post_init__(self) -> None:
        if not (0 <= self.seed <= _MASK64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_cars < 0 or self.n_pedestrians < 0:
            raise ConfigError("object counts must be >= 0")
        if not (self.area_half_extent > 0):
            raise ConfigError(f"area_half_extent must be > 0, got {self.area_half_extent}")
        if self.lidar_channels < 1 or self.points_per_channel < 1:
            raise ConfigError("scan pattern needs at least one channel and one step")
        if not (self.noise_sigma >= 0):
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not (self.sensor_height > 0):
            raise ConfigError(f"sensor_height must be > 0, got {self.sensor_height}")
        if not (self.max_range > 0):
            raise ConfigError(f"max_range must be > 0, got {self.max_range}")
        if not (self.elevation_low_deg <= self.elevation_high_deg):
            raise ConfigError("elevation_low_deg must be <= elevation_high_deg")

    @property
    def n_rays(self) -> int:
        return self.lidar_channels * self.points_per_channel


def _f32_stable(value: float) -> float:
    """Snap to the nearest float32, returned as a float64.

    Frame files store float32; sampling box parameters through this snap
    makes save → load the identity on box values.
    """
    return float(np.float32(value))


def _stable_yaw(yaw: float) -> float:
    """A float32-snapped yaw that still lies in (-pi, pi].

    float32 rounding can push a yaw just above pi (float32(pi) > pi), which
    the box constructor would wrap to a different value than the file would
    reload.  One corrective wrap-and-snap fixes the edge.
    """
    snapped = _f32_stable(yaw)
    if snapped > math.pi:
        snapped = _f32_stable(snapped - _TWO_PI)
    return snapped


def _sample_objects(
    config: SceneConfig, rng: SequentialRng
) -> tuple[list[Box3D], list[ClassLabel]]:
    """Rejection-sample non-overlapping boxes, cars first."""
    half = config.area_half_extent
    total = config.n_cars + config.n_pedestrians
    boxes: list[Box3D] = []
    labels: list[ClassLabel] = []
    placed: list[tuple[float, float, float]] = []  # (cx, cy, footprint radius)

    for index in range(total):
        label = ClassLabel.CAR if index < config.n_cars else ClassLabel.PEDESTRIAN
        if label is ClassLabel.CAR:
            length = rng.uniform(*CAR_LENGTH_RANGE)
            width = rng.uniform(*CAR_WIDTH_RANGE)
            height = rng.uniform(*CAR_HEIGHT_RANGE)
        else:
            length = rng.uniform(*PED_LENGTH_RANGE)
            width = length * rng.uniform(*PED_WIDTH_FRACTION)
            height = rng.uniform(*PED_HEIGHT_RANGE)
        yaw = _stable_yaw(math.pi - _TWO_PI * rng.uniform())
        length = _f32_stable(length)
        width = _f32_stable(width)
        height = _f32_stable(height)

        radius = 0.5 * math.hypot(length, width)
        lo_frac, hi_frac = (
            _CAR_BAND_FRACTIONS if label is ClassLabel.CAR else _PED_BAND_FRACTIONS
        )
        r_inner = max(
            _PLACEMENT_MIN_RANGE, _MIN_SENSOR_CLEARANCE + radius, lo_frac * half
        )
        r_outer = max(r_inner, min(hi_frac * half, half - radius))
        placed_ok = False
        for _ in range(_MAX_PLACE_ATTEMPTS):
            # Uniform over the annulus area: r^2 uniform in [r_inner^2, r_outer^2].
            r = math.sqrt(r_inner**2 + rng.uniform() * (r_outer**2 - r_inner**2))
            theta = _TWO_PI * rng.uniform()
            cx = _f32_stable(r * math.cos(theta))
            cy = _f32_stable(r * math.sin(theta))
            if any(
                math.hypot(cx - px, cy - py) < _MIN_OBJECT_CLEARANCE + radius + pr
                for px, py, pr in placed
            ):
                continue
            placed_ok = True
            break
        if not placed_ok:
            raise SceneError(
                f"could not place object {index + 1}/{total} after "
                f"{_MAX_PLACE_ATTEMPTS} attempts; the area is too crowded "
                f"for this object count"
            )

        placed.append((cx, cy, radius))
        boxes.append(
            Box3D(
                cx=cx,
                cy=cy,
                cz=height / 2.0,  # resting on the ground plane
                length=length,
                width=width,
                height=height,
                yaw=yaw,
            )
        )
        labels.append(label)
    return boxes, labels


def _ray_directions(config: SceneConfig) -> np.ndarray:
    """Unit direction for every (channel, azimuth step), channel-major."""
    elev = np.deg2rad(
        np.linspace(
            config.elevation_low_deg,
            config.elevation_high_deg,
            config.lidar_channels,
        )
    )
    azim = -math.pi + _TWO_PI * (
        np.arange(config.points_per_channel, dtype=np.float64)
        / config.points_per_channel
    )
    cos_e, sin_e = np.cos(elev), np.sin(elev)
    cos_a, sin_a = np.cos(azim), np.sin(azim)
    dirs = np.empty((config.n_rays, 3), dtype=np.float64)
    dirs[:, 0] = (cos_e[:, None] * cos_a[None, :]).ravel()
    dirs[:, 1] = (cos_e[:, None] * sin_a[None, :]).ravel()
    dirs[:, 2] = np.repeat(sin_e, config.points_per_channel)
    return dirs


def generate_scene(config: SceneConfig, frame_id: int = 0) -> LabeledFrame:
    """Generate one frame; a pure function of ``config``.

    ``frame_id`` is metadata only (it names the frame); it does not feed the
    random streams.  Corpus generation varies the per-frame seed instead.
    """
    placement = SequentialRng(derive_key(config.seed, _TAG_PLACEMENT))
    boxes, labels = _sample_objects(config, placement)

    dirs = _ray_directions(config)
    origin = np.array([0.0, 0.0, config.sensor_height], dtype=np.float64)
    if boxes:
        box_arr = np.stack([b.as_vector() for b in boxes])
    else:
        box_arr = np.empty((0, 7), dtype=np.float64)
    t_box, box_idx = kernels.raycast_boxes(origin, dirs, box_arr)

    dz = dirs[:, 2]
    with np.errstate(divide="ignore"):
        t_ground = np.where(dz < 0.0, -config.sensor_height / dz, np.inf)
    t_near = np.minimum(t_box, t_ground)
    object_hit = t_box <= t_ground  # an object in front of (or on) the ground

    noise = normal_array(
        derive_key(config.seed, _TAG_RANGE_NOISE), 0, config.n_rays
    )
    t_noisy = t_near + config.noise_sigma * noise
    keep = np.isfinite(t_near) & (t_noisy > 0.0) & (t_noisy <= config.max_range)

    points = origin[None, :] + t_noisy[keep, None] * dirs[keep]

    albedo = np.full(config.n_rays, _GROUND_ALBEDO, dtype=np.float64)
    if boxes:
        class_albedo = np.array([_CLASS_ALBEDO[l] for l in labels])
        on_object = object_hit & (box_idx >= 0)
        albedo[on_object] = class_albedo[box_idx[on_object]]
    falloff = 1.0 / (1.0 + (t_noisy[keep] / _INTENSITY_HALF_RANGE) ** 2)
    intensity = (albedo[keep] * falloff).astype(np.float32)

    cloud = PointCloud(
        points.astype(np.float32),
        intensity,
        sensor_origin=(0.0, 0.0, config.sensor_height),
    )
    kept_box_idx = np.where(object_hit & (box_idx >= 0), box_idx, -1)[keep]
    occluded = [
        int(np.count_nonzero(points_in_box(cloud, box) & (kept_box_idx == i)))
        < VISIBILITY_FLOOR
        for i, box in enumerate(boxes)
    ]
    return LabeledFrame(
        frame_id=frame_id,
        cloud=cloud,
        boxes=boxes,
        labels=labels,
        occluded=occluded,
    )


def generate_corpus(
    config: SceneConfig, n_frames: int, out_dir: str | os.PathLike
) -> list[dict]:
    """Write ``n_frames`` frames plus a ``manifest.json`` into ``out_dir``.

    Frame ``i`` uses seed ``config.seed XOR i``, so frames are independent
    and could be produced in any order (or in parallel) without changing a
    byte.  Returns the manifest: one entry per frame with its relative path,
    frame id, per-frame seed, and object counts.
    """
    if n_frames < 0:
        raise ConfigError(f"n_frames must be >= 0, got {n_frames}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest: list[dict] = []
    for index in range(n_frames):
        frame_config = replace(config, seed=(config.seed ^ index) & _MASK64)
        try:
            frame = generate_scene(frame_config, frame_id=index)
        except SceneError as exc:
            raise SceneError(f"frame {index}: {exc}") from exc
        name = f"frame_{index:05d}.tdbf"
        save_frame(out / name, frame)
        manifest.append(
            {
                "path": name,
                "frame_id": index,
                "seed": frame_config.seed,
                "n_cars": frame_config.n_cars,
                "n_pedestrians": frame_config.n_pedestrians,
            }
        )

    manifest_path = out / "manifest.json"
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, manifest_path)
    return manifest


def load_manifest(corpus_dir: str | os.PathLike) -> list[dict]:
    """Read a corpus manifest written by :func:`generate_corpus`."""
    path = Path(corpus_dir) / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"no manifest.json in {corpus_dir}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
