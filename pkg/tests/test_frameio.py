"""Frame container format: round-trips and corruption detection."""

import numpy as np
import pytest

from tdbench.errors import FrameDataError, FrameFormatError
from tdbench.frameio import MAGIC, load_frame, save_frame
from tdbench.geometry import Box3D, ClassLabel, LabeledFrame, PointCloud


def _frame(n=17, with_intensity=True, frame_id=4):
    rng = np.random.default_rng(0)
    xyz = rng.uniform(-50, 50, size=(n, 3)).astype(np.float32)
    intensity = rng.uniform(0, 1, n).astype(np.float32) if with_intensity else None
    cloud = PointCloud(xyz, intensity, sensor_origin=(0.0, 0.0, 1.8))
    # Storage is float32, so fixture boxes use exactly representable values.
    boxes = [
        Box3D(1.0, 2.0, 0.75, 4.25, 1.875, 1.625, 0.5),
        Box3D(-3.0, 5.0, 0.875, 0.625, 0.625, 1.75, -1.25),
    ]
    labels = [ClassLabel.CAR, ClassLabel.PEDESTRIAN]
    return LabeledFrame(frame_id, cloud, boxes, labels, [False, True])


def test_roundtrip_preserves_everything(tmp_path):
    frame = _frame()
    path = tmp_path / "frame_00004.tdbf"  # frame id is carried by the name
    save_frame(path, frame)
    loaded = load_frame(path)
    assert loaded.frame_id == frame.frame_id
    assert np.array_equal(loaded.cloud.xyz, frame.cloud.xyz)
    assert np.array_equal(loaded.cloud.intensity, frame.cloud.intensity)
    assert loaded.boxes == frame.boxes
    assert loaded.labels == frame.labels
    assert loaded.occluded == frame.occluded


def test_roundtrip_no_intensity_and_empty(tmp_path):
    # A missing intensity channel is stored as zeros.
    frame = _frame(with_intensity=False)
    save_frame(tmp_path / "a.tdbf", frame)
    loaded = load_frame(tmp_path / "a.tdbf")
    assert np.array_equal(loaded.cloud.intensity, np.zeros(len(frame.cloud), dtype=np.float32))

    empty = LabeledFrame(0, PointCloud(np.zeros((0, 3), dtype=np.float32)), [], [], [])
    save_frame(tmp_path / "b.tdbf", empty)
    loaded = load_frame(tmp_path / "b.tdbf")
    assert len(loaded.cloud) == 0 and loaded.boxes == []


def test_save_is_byte_deterministic(tmp_path):
    frame = _frame()
    save_frame(tmp_path / "a.tdbf", frame)
    save_frame(tmp_path / "b.tdbf", frame)
    assert (tmp_path / "a.tdbf").read_bytes() == (tmp_path / "b.tdbf").read_bytes()


def test_bad_magic_rejected(tmp_path):
    frame = _frame()
    path = tmp_path / "f.tdbf"
    save_frame(path, frame)
    data = bytearray(path.read_bytes())
    assert bytes(data[:4]) == MAGIC
    data[:4] = b"NOPE"
    path.write_bytes(bytes(data))
    with pytest.raises(FrameFormatError):
        load_frame(path)


def test_truncation_rejected(tmp_path):
    frame = _frame()
    path = tmp_path / "f.tdbf"
    save_frame(path, frame)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 7])
    with pytest.raises(FrameFormatError):
        load_frame(path)


def test_bad_data_values_detected(tmp_path):
    import struct

    frame = _frame(n=8)
    path = tmp_path / "f.tdbf"
    save_frame(path, frame)
    pristine = path.read_bytes()

    # Non-finite coordinate in the point block.
    data = bytearray(pristine)
    data[18:22] = struct.pack("<f", float("nan"))
    path.write_bytes(bytes(data))
    with pytest.raises(FrameDataError):
        load_frame(path)

    # Unknown class label in the box block.
    data = bytearray(pristine)
    box_offset = 18 + 8 * 16
    data[box_offset + 28] = 0xFF  # label byte of box 0
    path.write_bytes(bytes(data))
    with pytest.raises(FrameDataError):
        load_frame(path)
