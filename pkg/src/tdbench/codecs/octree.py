"""Octree occupancy codec.

Positions are quantized onto a voxel grid (``pqs * unit_scale`` voxels per
meter), deduplicated, and the occupied-voxel set is serialized as a
breadth-first stream of octree occupancy bytes.  The byte stream is entropy
coded by an adaptive binary range coder whose context is the tree-level
parity crossed with the number of sibling bits already coded as set.

Reconstruction places each surviving voxel's point at the voxel center, so
the per-axis error is at most half a voxel: ``0.5 / (pqs * unit_scale)``
meters.  Duplicate points collapse; decoded clouds are sorted by Morton
code rather than input order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import BitstreamError, CapacityError, ConfigError, FrameDataError
from ..geometry import PointCloud
from . import container

__all__ = ["OctreeConfig", "PRESETS", "encode", "decode", "MAX_DEPTH"]

MAX_DEPTH = 21  # Morton-interleaved 3 x 21 bits fills an int64

_HEADER = struct.Struct("<5dQB")  # pqs, unit_scale, bbox_min xyz, count, depth


@dataclass(frozen=True)
class OctreeConfig:
    """Codec parameters.

    ``pqs`` is the position quantization scale in voxels per scaled unit;
    ``unit_scale`` converts meters to those units.  The effective voxel edge
    in meters is ``1 / (pqs * unit_scale)``.
    """

    pqs: float
    unit_scale: float = 100.0

    def __post_init__(self) -> None:
        if not (self.pqs > 0.0 and np.isfinite(self.pqs)):
            raise ConfigError(f"pqs must be finite and > 0, got {self.pqs}")
        if not (self.unit_scale > 0.0 and np.isfinite(self.unit_scale)):
            raise ConfigError(
                f"unit_scale must be finite and > 0, got {self.unit_scale}"
            )

    @property
    def voxel_size(self) -> float:
        """Voxel edge length in meters."""
        return 1.0 / (self.pqs * self.unit_scale)

    @property
    def max_error(self) -> float:
        """Guaranteed per-axis reconstruction error bound in meters."""
        return 0.5 * self.voxel_size


#: Compression presets, strongest (coarsest voxels) first.
PRESETS: dict[str, OctreeConfig] = {
    "p0": OctreeConfig(pqs=0.0125),
    "p1": OctreeConfig(pqs=0.03125),
    "p2": OctreeConfig(pqs=0.125),
    "p3": OctreeConfig(pqs=0.375),
}


def encode(cloud: PointCloud, config: OctreeConfig) -> bytes:
    """Compress a cloud; raises CapacityError if the grid needs > 21 levels."""
    n = len(cloud)
    scale = config.pqs * config.unit_scale

    if n == 0:
        header = _HEADER.pack(config.pqs, config.unit_scale, 0.0, 0.0, 0.0, 0, 0)
        return container.build(container.CODEC_OCTREE, header, b"")

    bbox_min, _bbox_max, finite = kernels.bounds3(cloud.xyz)
    if not finite:
        raise FrameDataError("cannot encode non-finite coordinates")

    raw_codes, umax = kernels.quantize_floor_morton(cloud.xyz, bbox_min, scale)
    depth = umax.bit_length()
    if depth > MAX_DEPTH:
        raise CapacityError(
            f"grid of {config.pqs * config.unit_scale:g} voxels/m over this cloud "
            f"needs {depth} octree levels; at most {MAX_DEPTH} are representable"
        )

    if depth == 0:
        codes = np.zeros(1, dtype=np.int64)
    else:
        codes = np.unique(raw_codes)
    count = len(codes)

    # Build occupancy bytes bottom-up: each pass folds the current level's
    # sorted node codes into per-parent occupancy masks, then recurses on the
    # (already sorted, unique) parent codes.
    occ_parts: list[np.ndarray] = []
    level_sizes = np.empty(depth, dtype=np.int64)
    children = codes
    for level in range(depth - 1, -1, -1):
        parents = children >> 3
        octant_bits = np.int64(1) << (children & 7)
        starts = np.flatnonzero(
            np.concatenate(([True], parents[1:] != parents[:-1]))
        )
        occ_parts.append(np.bitwise_or.reduceat(octant_bits, starts).astype(np.uint8))
        level_sizes[level] = len(starts)
        children = parents[starts]

    if depth > 0:
        assert level_sizes[0] == 1
        occ_parts.reverse()
        occ_stream = np.concatenate(occ_parts)
    else:
        occ_stream = np.zeros(0, dtype=np.uint8)

    payload = kernels.occ_encode(occ_stream, level_sizes).tobytes()
    header = _HEADER.pack(
        config.pqs,
        config.unit_scale,
        float(bbox_min[0]),
        float(bbox_min[1]),
        float(bbox_min[2]),
        count,
        depth,
    )
    return container.build(container.CODEC_OCTREE, header, payload)


def decode(data: bytes) -> PointCloud:
    """Decompress a container produced by :func:`encode`."""
    codec_id, header, payload = container.parse(data)
    if codec_id != container.CODEC_OCTREE:
        raise BitstreamError(f"expected octree codec id, found {codec_id}")
    config, bbox_min, count, depth = parse_header(header)
    scale = config.pqs * config.unit_scale

    if count == 0:
        return PointCloud(np.zeros((0, 3), dtype=np.float64))
    if depth == 0:
        if count != 1:
            raise BitstreamError(f"zero-depth stream claims {count} voxels")
        codes = np.zeros(1, dtype=np.int64)
    else:
        try:
            codes = kernels.occ_decode_codes(payload, depth, count)
        except ValueError as exc:
            raise BitstreamError(f"occupancy stream invalid: {exc}") from exc
        if len(codes) != count:
            raise BitstreamError(
                f"stream decodes to {len(codes)} voxels, header claims {count}"
            )

    ux, uy, uz = kernels.morton_decode3(codes)
    xyz = np.empty((len(codes), 3), dtype=np.float64)
    xyz[:, 0] = bbox_min[0] + (ux + 0.5) / scale
    xyz[:, 1] = bbox_min[1] + (uy + 0.5) / scale
    xyz[:, 2] = bbox_min[2] + (uz + 0.5) / scale
    return PointCloud(xyz)


def parse_header(header: bytes) -> tuple[OctreeConfig, np.ndarray, int, int]:
    """Unpack an octree header into (config, bbox_min, voxel count, depth)."""
    if len(header) != _HEADER.size:
        raise BitstreamError(
            f"octree header is {len(header)} bytes, expected {_HEADER.size}"
        )
    pqs, unit_scale, b0, b1, b2, count, depth = _HEADER.unpack(header)
    if depth > MAX_DEPTH:
        raise BitstreamError(f"octree depth {depth} exceeds limit {MAX_DEPTH}")
    if not (np.isfinite(pqs) and pqs > 0.0) or not (
        np.isfinite(unit_scale) and unit_scale > 0.0
    ):
        raise BitstreamError("octree header carries invalid scales")
    config = OctreeConfig(pqs=pqs, unit_scale=unit_scale)
    return config, np.array([b0, b1, b2]), count, depth


