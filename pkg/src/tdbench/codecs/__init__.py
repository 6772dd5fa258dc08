"""Point-cloud codecs sharing one container format.

Two codecs are provided:

* :mod:`~tdbench.codecs.octree` — voxelize, deduplicate, and entropy-code an
  octree occupancy stream.  Strong compression; collapses duplicates.
* :mod:`~tdbench.codecs.quant` — per-axis uniform quantization with three
  packing levels.  Count-preserving; much faster.

Both emit self-describing containers (magic ``TDC1`` + payload CRC), so
:func:`decode_any` can route a blob to the right decoder.
"""

from __future__ import annotations

from ..errors import BitstreamError
from ..geometry import PointCloud
from . import container
from .octree import PRESETS, OctreeConfig
from .octree import decode as decode_octree
from .octree import encode as encode_octree
from .quant import GRID as QUANT_GRID
from .quant import QuantConfig
from .quant import decode as decode_quant
from .quant import encode as encode_quant

__all__ = [
    "OctreeConfig",
    "QuantConfig",
    "PRESETS",
    "QUANT_GRID",
    "encode_octree",
    "decode_octree",
    "encode_quant",
    "decode_quant",
    "decode_any",
    "describe",
]


def decode_any(data: bytes) -> PointCloud:
    """Decode a container regardless of which codec produced it."""
    codec_id, _, _ = container.parse(data)
    if codec_id == container.CODEC_OCTREE:
        return decode_octree(data)
    if codec_id == container.CODEC_QUANT:
        return decode_quant(data)
    raise BitstreamError(f"unknown codec id {codec_id}")


def describe(data: bytes) -> str:
    """A short human-readable label for a compressed blob."""
    codec_id, header, payload = container.parse(data)
    if codec_id == container.CODEC_OCTREE:
        from . import octree

        config, _, count, depth = octree.parse_header(header)
        return (
            f"octree pqs={config.pqs:g} unit_scale={config.unit_scale:g} "
            f"depth={depth} voxels={count} payload={len(payload)}B"
        )
    if codec_id == container.CODEC_QUANT:
        from . import quant

        config, mode, count, _, _, _ = quant.parse_header(header)
        return (
            f"quant q_bits={config.q_bits} level={config.level} mode={mode} "
            f"points={count} payload={len(payload)}B"
        )
    return f"unknown codec id {codec_id} payload={len(payload)}B"
