"""Geometry primitives: boxes, clouds, membership tests."""

import math

import numpy as np
import pytest

from tdbench.errors import ConfigError
from tdbench.geometry import (
    Box3D,
    ClassLabel,
    LabeledFrame,
    PointCloud,
    points_in_box,
    wrap_angle,
)


def test_box_volume_and_vector_roundtrip():
    box = Box3D(1.0, -2.0, 0.5, 4.0, 2.0, 1.5, 0.3)
    assert box.volume == pytest.approx(4.0 * 2.0 * 1.5)
    again = Box3D.from_vector(box.as_vector())
    assert again == box


def test_box_corners_bev_axis_aligned():
    box = Box3D(0.0, 0.0, 0.0, 4.0, 2.0, 1.0, 0.0)
    corners = np.asarray(box.corners_bev())
    assert sorted(map(tuple, np.round(corners, 9))) == [
        (-2.0, -1.0),
        (-2.0, 1.0),
        (2.0, -1.0),
        (2.0, 1.0),
    ]


def test_box_corners_rotate_with_yaw():
    box = Box3D(0.0, 0.0, 0.0, 4.0, 2.0, 1.0, math.pi / 2)
    corners = np.asarray(box.corners_bev())
    # A quarter turn swaps the roles of length and width.
    assert np.max(np.abs(corners[:, 0])) == pytest.approx(1.0)
    assert np.max(np.abs(corners[:, 1])) == pytest.approx(2.0)


def test_box_rejects_nonpositive_dims():
    with pytest.raises(ConfigError):
        Box3D(0, 0, 0, 0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        Box3D(0, 0, 0, 1.0, -1.0, 1.0, 0.0)


def test_wrap_angle_range():
    for raw in (-10.0, -math.pi, 0.0, math.pi, 10.0, 123.456):
        wrapped = wrap_angle(raw)
        assert -math.pi <= wrapped <= math.pi
        assert math.isclose(
            math.sin(wrapped), math.sin(raw), abs_tol=1e-12
        ) and math.isclose(math.cos(wrapped), math.cos(raw), abs_tol=1e-12)


def test_pointcloud_validates_shape():
    with pytest.raises(ConfigError):
        PointCloud(np.zeros((3, 2), dtype=np.float32))
    with pytest.raises(ConfigError):
        PointCloud(np.zeros((2, 3), dtype=np.float32), intensity=np.zeros(3, dtype=np.float32))


def test_pointcloud_len_and_bounds():
    xyz = np.array([[0, 0, 0], [1, 2, 3], [-1, -2, -3]], dtype=np.float32)
    cloud = PointCloud(xyz)
    assert len(cloud) == 3
    lo, hi = cloud.bounds()
    assert np.allclose(lo, [-1, -2, -3]) and np.allclose(hi, [1, 2, 3])


def test_points_in_box_rotated_membership():
    box = Box3D(0.0, 0.0, 1.0, 4.0, 2.0, 2.0, math.pi / 4)
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    inside_local = np.array([[1.9, 0.0, 0.0], [0.0, 0.9, 0.5], [0.0, 0.0, -0.99]])
    outside_local = np.array([[2.1, 0.0, 0.0], [0.0, 1.1, 0.0], [0.0, 0.0, 1.01]])

    def to_world(p):
        return np.column_stack(
            [c * p[:, 0] - s * p[:, 1], s * p[:, 0] + c * p[:, 1], p[:, 2] + 1.0]
        )

    cloud = PointCloud(np.vstack([to_world(inside_local), to_world(outside_local)]).astype(np.float32))
    mask = points_in_box(cloud, box)
    assert mask.tolist() == [True, True, True, False, False, False]


def test_labeled_frame_consistency_checks():
    cloud = PointCloud(np.zeros((1, 3), dtype=np.float32))
    box = Box3D(0, 0, 0, 1, 1, 1, 0)
    with pytest.raises(ConfigError):
        LabeledFrame(0, cloud, [box], [ClassLabel.CAR], [False, True])
    with pytest.raises(ConfigError):
        LabeledFrame(0, cloud, [box], [], [False])
    # Omitted occlusion flags default to all-visible.
    frame = LabeledFrame(0, cloud, [box], [ClassLabel.CAR], [])
    assert frame.occluded == [False]
