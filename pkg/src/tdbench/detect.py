"""Deterministic geometric 3D object detector.

A deliberately simple, closed-form pipeline whose accuracy responds to
geometric degradation of the input cloud:

1. ground removal by height threshold against the known z = 0 ground plane;
2. single-linkage clustering of the remaining points in the bird's-eye
   plane (grid-hashed union-find, exact Euclidean radius);
3. per-cluster oriented-box fit — yaw from the principal axis of the xy
   covariance, extents from the rotated min/max, z extent from the cluster's
   min/max heights;
4. classification by footprint/height size gates, scored by a saturating
   point-count ratio.

Every stage is deterministic, so identical clouds produce byte-identical
detection lists.  The pipeline is equivariant under yaw rotation plus
translation of the input (up to floating-point round-off, and up to the
pi-symmetry of a fitted box).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, FrameDataError
from .geometry import Box3D, ClassLabel, PointCloud

__all__ = [
    "DetectorParams",
    "Detection",
    "InferenceReport",
    "detect",
    "measure_inference",
    "detection_record",
    "save_detections",
    "load_detections",
]

#: Fitted extents are floored at this value so degenerate clusters (e.g.
#: coincident duplicate points) still yield a valid box.
MIN_EXTENT = 0.01

_CLASS_NAMES = {ClassLabel.CAR: "Car", ClassLabel.PEDESTRIAN: "Pedestrian"}
_NAME_TO_CLASS = {name: label for label, name in _CLASS_NAMES.items()}


def class_name(label: ClassLabel) -> str:
    """Display name used in reports and serialized detections."""
    return _CLASS_NAMES[ClassLabel(label)]


@dataclass(frozen=True)
class DetectorParams:
    """Tunables for the geometric detector.

    The size gates default to envelopes around the generator's object size
    ranges, widened so quantization-inflated or partially observed fits
    still land in the right class.  A cluster is classified as a pedestrian
    if it fits the pedestrian gate, else as a car if it fits the car gate,
    else it is discarded.  The minimum footprint/thickness/height gates
    reject degenerate fits: line-like clusters from a single scan ring or a
    single flat face, flat ground residue, and oversized merged blobs.
    """

    ground_z_tolerance: float = 0.2
    cluster_radius: float = 0.7
    min_cluster_points: int = 8
    pedestrian_max_footprint: float = 1.4
    pedestrian_max_height: float = 2.4
    pedestrian_min_height: float = 0.5
    car_max_footprint: float = 8.0
    car_max_height: float = 2.6
    car_min_footprint: float = 2.0
    car_min_thickness: float = 0.25

    def __post_init__(self) -> None:
        if not (self.cluster_radius > 0.0 and math.isfinite(self.cluster_radius)):
            raise ConfigError(
                f"cluster_radius must be finite and > 0, got {self.cluster_radius}"
            )
        if self.min_cluster_points < 1:
            raise ConfigError(
                f"min_cluster_points must be >= 1, got {self.min_cluster_points}"
            )
        if not math.isfinite(self.ground_z_tolerance):
            raise ConfigError("ground_z_tolerance must be finite")
        for name in (
            "pedestrian_max_footprint",
            "pedestrian_max_height",
            "pedestrian_min_height",
            "car_max_footprint",
            "car_max_height",
            "car_min_footprint",
            "car_min_thickness",
        ):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class Detection:
    """One detected object: an oriented box, its class and a rank score."""

    box: Box3D
    label: ClassLabel
    score: float

    def __post_init__(self) -> None:
        if not 0.0 < self.score <= 1.0:
            raise ConfigError(f"score must be in (0, 1], got {self.score}")


def _fit_box(points: np.ndarray) -> Box3D:
    """Closed-form oriented-box fit: PCA yaw, rotated min/max extents."""
    mean_x = float(points[:, 0].mean())
    mean_y = float(points[:, 1].mean())
    dx = points[:, 0] - mean_x
    dy = points[:, 1] - mean_y
    sxx = float((dx * dx).mean())
    syy = float((dy * dy).mean())
    sxy = float((dx * dy).mean())
    yaw = 0.5 * math.atan2(2.0 * sxy, sxx - syy)

    c, s = math.cos(yaw), math.sin(yaw)
    u = dx * c + dy * s  # along the principal axis
    v = -dx * s + dy * c
    u_min, u_max = float(u.min()), float(u.max())
    v_min, v_max = float(v.min()), float(v.max())
    z_min, z_max = float(points[:, 2].min()), float(points[:, 2].max())

    cu = 0.5 * (u_min + u_max)
    cv = 0.5 * (v_min + v_max)
    return Box3D(
        cx=mean_x + cu * c - cv * s,
        cy=mean_y + cu * s + cv * c,
        cz=0.5 * (z_min + z_max),
        length=max(u_max - u_min, MIN_EXTENT),
        width=max(v_max - v_min, MIN_EXTENT),
        height=max(z_max - z_min, MIN_EXTENT),
        yaw=yaw,
    )


def _classify(box: Box3D, params: DetectorParams) -> ClassLabel | None:
    footprint = max(box.length, box.width)
    if (
        footprint <= params.pedestrian_max_footprint
        and params.pedestrian_min_height <= box.height <= params.pedestrian_max_height
    ):
        return ClassLabel.PEDESTRIAN
    if (
        params.car_min_footprint <= footprint <= params.car_max_footprint
        and box.height <= params.car_max_height
        and min(box.length, box.width) >= params.car_min_thickness
    ):
        return ClassLabel.CAR
    return None


def detect(
    cloud: PointCloud, params: DetectorParams = DetectorParams()
) -> list[Detection]:
    """Run the geometric detector; returns detections sorted by score
    descending (ties broken by box center for determinism)."""
    if len(cloud) == 0:
        return []
    xyz = cloud.xyz.astype(np.float64, copy=False)
    keep = xyz[:, 2] >= params.ground_z_tolerance
    points = xyz[keep]
    if len(points) == 0:
        return []

    labels = kernels.cluster_labels(points[:, :2], params.cluster_radius)
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    starts = np.flatnonzero(
        np.concatenate(([True], sorted_labels[1:] != sorted_labels[:-1]))
    )
    ends = np.append(starts[1:], len(sorted_labels))

    detections: list[Detection] = []
    for begin, end in zip(starts, ends):
        count = int(end - begin)
        if count < params.min_cluster_points:
            continue
        box = _fit_box(points[order[begin:end]])
        label = _classify(box, params)
        if label is None:
            continue
        score = min(1.0, count / 100.0)
        detections.append(Detection(box=box, label=label, score=score))

    detections.sort(key=lambda d: (-d.score, d.box.cx, d.box.cy, d.box.cz))
    return detections


@dataclass(frozen=True)
class InferenceReport:
    """Wall-clock detector timing, normalized per frame."""

    median_ms: float
    p95_ms: float
    batch_size: int
    n_frames: int
    n_batches: int
    per_batch_ms: tuple[float, ...] = field(repr=False, default=())


def measure_inference(
    frames: Sequence[PointCloud],
    params: DetectorParams = DetectorParams(),
    batch_size: int = 1,
) -> InferenceReport:
    """Time the detector over ``frames`` in batches of ``batch_size``.

    Frames are processed sequentially inside each batch; the reported
    per-frame numbers are batch wall time divided by the number of frames in
    the batch, after 3 untimed warmup batches (JIT compilation, caches).
    """
    if len(frames) == 0:
        raise ConfigError("measure_inference needs at least one frame")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")

    batches = [
        frames[i : i + batch_size] for i in range(0, len(frames), batch_size)
    ]
    for batch in batches[:3] or [frames[:1]]:
        for frame in batch:
            detect(frame, params)

    per_frame_ms: list[float] = []
    per_batch_ms: list[float] = []
    for batch in batches:
        start = time.perf_counter()
        for frame in batch:
            detect(frame, params)
        elapsed_ms = (time.perf_counter() - start) * 1e3
        per_batch_ms.append(elapsed_ms)
        per_frame_ms.append(elapsed_ms / len(batch))

    return InferenceReport(
        median_ms=float(np.median(per_frame_ms)),
        p95_ms=float(np.percentile(per_frame_ms, 95.0)),
        batch_size=batch_size,
        n_frames=len(frames),
        n_batches=len(batches),
        per_batch_ms=tuple(per_batch_ms),
    )


# ---------------------------------------------------------------------------
# JSON-lines serialization: {"frame_id", "class", "score", "box": [7 floats]}
# ---------------------------------------------------------------------------


def detection_record(frame_id: int, det: Detection) -> dict:
    """The JSON-serializable record for one detection."""
    return {
        "frame_id": int(frame_id),
        "class": class_name(det.label),
        "score": float(det.score),
        "box": [round(float(v), 9) for v in det.box.as_vector()],
    }


def save_detections(
    path: str | os.PathLike,
    detections_by_frame: Mapping[int, Iterable[Detection]],
) -> None:
    """Write detections as JSON lines, atomically, ordered by frame id."""
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for frame_id in sorted(detections_by_frame):
            for det in detections_by_frame[frame_id]:
                fh.write(json.dumps(detection_record(frame_id, det)) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_detections(path: str | os.PathLike) -> dict[int, list[Detection]]:
    """Read a JSON-lines detection file written by :func:`save_detections`."""
    out: dict[int, list[Detection]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                label = _NAME_TO_CLASS[rec["class"]]
                det = Detection(
                    box=Box3D.from_vector(np.asarray(rec["box"], dtype=np.float64)),
                    label=label,
                    score=float(rec["score"]),
                )
                frame_id = int(rec["frame_id"])
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                raise FrameDataError(
                    f"{path}: line {line_no} is not a valid detection: {exc}"
                ) from exc
            out.setdefault(frame_id, []).append(det)
    return out
