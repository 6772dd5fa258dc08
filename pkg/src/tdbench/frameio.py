"""Binary frame files: point cloud + ground-truth boxes in one blob.

Layout (all integers little-endian)::

    offset  size  field
    0       4     magic  b"TDBF"
    4       2     version (currently 1)  u16
    6       8     point_count            u64
    14      4     box_count              u32
    18      16*N  points: x, y, z, intensity as float32 each
    ...     30*B  boxes:  cx, cy, cz, length, width, height, yaw as float32,
                  then the class label as u8 and a flags byte
                  (bit 0: box is occluded / under-sampled; other bits reserved)

Storage is float32; loading hands back float32 arrays untouched.  Saving a
float64 cloud (e.g. a codec reconstruction) casts to float32, which is the
format's precision floor.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import FrameDataError, FrameFormatError
from .geometry import Box3D, ClassLabel, LabeledFrame, PointCloud

__all__ = ["MAGIC", "VERSION", "load_frame", "save_frame"]

MAGIC = b"TDBF"
VERSION = 1

_HEADER = struct.Struct("<4sHQI")
_POINT_SIZE = 16  # 4 x float32
_BOX_SIZE = 30  # 7 x float32 + class u8 + flags u8
_FLAG_OCCLUDED = 0x01
_MAX_POINTS = 1 << 32  # sanity bound against garbage headers


def save_frame(path: str | os.PathLike, frame: LabeledFrame) -> None:
    """Write a frame to ``path`` atomically (write temp file, then rename)."""
    cloud = frame.cloud
    n = len(cloud)
    xyz = cloud.xyz.astype(np.float32, copy=False)
    if cloud.intensity is not None:
        intensity = cloud.intensity.astype(np.float32, copy=False)
    else:
        intensity = np.zeros(n, dtype=np.float32)

    points = np.empty((n, 4), dtype="<f4")
    points[:, :3] = xyz
    points[:, 3] = intensity

    boxes = np.empty(len(frame.boxes), dtype=_box_dtype())
    for i, (box, label, occ) in enumerate(
        zip(frame.boxes, frame.labels, frame.occluded)
    ):
        flags = _FLAG_OCCLUDED if occ else 0
        boxes[i] = (*box.as_vector().astype(np.float32), int(label), flags)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, len(frame.boxes)))
        fh.write(points.tobytes())
        fh.write(boxes.tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_frame(path: str | os.PathLike) -> LabeledFrame:
    """Read a frame, validating structure and data separately.

    Raises :class:`FrameFormatError` for structural problems (wrong magic,
    unsupported version, truncation, trailing bytes) and
    :class:`FrameDataError` for well-formed files with bad values
    (non-finite coordinates, unknown class labels, non-positive box sizes).
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FrameFormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, n_points, n_boxes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FrameFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FrameFormatError(f"{path}: unsupported version {version}")
    if n_points > _MAX_POINTS:
        raise FrameFormatError(f"{path}: implausible point count {n_points}")

    expected = _HEADER.size + n_points * _POINT_SIZE + n_boxes * _BOX_SIZE
    if len(data) != expected:
        raise FrameFormatError(
            f"{path}: size mismatch, header implies {expected} bytes, file has {len(data)}"
        )

    offset = _HEADER.size
    points = np.frombuffer(
        data, dtype="<f4", count=n_points * 4, offset=offset
    ).reshape(n_points, 4)
    if not np.isfinite(points).all():
        raise FrameDataError(f"{path}: non-finite point values")
    offset += n_points * _POINT_SIZE

    raw_boxes = np.frombuffer(data, dtype=_box_dtype(), count=n_boxes, offset=offset)
    boxes: list[Box3D] = []
    labels: list[ClassLabel] = []
    occluded: list[bool] = []
    valid_labels = {int(v) for v in ClassLabel}
    for i in range(n_boxes):
        vec = np.array(
            [raw_boxes[i][name] for name in ("cx", "cy", "cz", "l", "w", "h", "yaw")],
            dtype=np.float64,
        )
        if not np.isfinite(vec).all():
            raise FrameDataError(f"{path}: non-finite values in box {i}")
        if vec[3] <= 0 or vec[4] <= 0 or vec[5] <= 0:
            raise FrameDataError(f"{path}: non-positive size in box {i}")
        label = int(raw_boxes[i]["label"])
        if label not in valid_labels:
            raise FrameDataError(f"{path}: unknown class label {label} in box {i}")
        flags = int(raw_boxes[i]["flags"])
        if flags & ~_FLAG_OCCLUDED:
            raise FrameDataError(f"{path}: unknown flag bits 0x{flags:02x} in box {i}")
        boxes.append(Box3D.from_vector(vec))
        labels.append(ClassLabel(label))
        occluded.append(bool(flags & _FLAG_OCCLUDED))

    frame_id = _frame_id_from_name(path.stem)
    cloud = PointCloud(points[:, :3].copy(), points[:, 3].copy())
    return LabeledFrame(
        frame_id=frame_id, cloud=cloud, boxes=boxes, labels=labels, occluded=occluded
    )


def _box_dtype() -> np.dtype:
    return np.dtype(
        [
            ("cx", "<f4"),
            ("cy", "<f4"),
            ("cz", "<f4"),
            ("l", "<f4"),
            ("w", "<f4"),
            ("h", "<f4"),
            ("yaw", "<f4"),
            ("label", "u1"),
            ("flags", "u1"),
        ]
    )


def _frame_id_from_name(stem: str) -> int:
    """Recover a frame id from names like ``frame_000017``; 0 otherwise."""
    digits = "".join(ch for ch in stem if ch.isdigit())
    return int(digits) if digits else 0
