"""Shared on-disk container for compressed point clouds.

Layout (little-endian)::

    offset  size  field
    0       4     magic b"TDC1"
    4       1     codec id (1 = octree occupancy codec, 2 = quantize codec)
    5       2     header length H  (u16)
    7       H     codec-specific header
    7+H     8     payload length P (u64)
    15+H    P     payload (entropy-coded body)
    15+H+P  4     CRC-32 of the payload (zlib polynomial)

The CRC covers only the payload: header fields are few and structurally
validated by the codec, while the payload is where bit corruption would
otherwise silently produce a plausible-looking cloud.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import BitstreamError

MAGIC = b"TDC1"
CODEC_OCTREE = 1
CODEC_QUANT = 2

_PREFIX = struct.Struct("<4sBH")
_PAYLOAD_LEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")

_MAX_HEADER = 1 << 12
_MAX_PAYLOAD = 1 << 40


def build(codec_id: int, header: bytes, payload: bytes) -> bytes:
    """Assemble a container around a codec header and payload."""
    if not 0 < codec_id < 256:
        raise BitstreamError(f"codec id {codec_id} out of range")
    if len(header) > _MAX_HEADER:
        raise BitstreamError(f"header too large ({len(header)} bytes)")
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return b"".join(
        (
            _PREFIX.pack(MAGIC, codec_id, len(header)),
            header,
            _PAYLOAD_LEN.pack(len(payload)),
            payload,
            _CRC.pack(crc),
        )
    )


def parse(data: bytes) -> tuple[int, bytes, np.ndarray]:
    """Split a container into (codec_id, header, payload array), verifying CRC."""
    if len(data) < _PREFIX.size:
        raise BitstreamError("container shorter than its fixed prefix")
    magic, codec_id, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise BitstreamError(f"bad container magic {magic!r}")
    pos = _PREFIX.size
    if len(data) < pos + header_len + _PAYLOAD_LEN.size:
        raise BitstreamError("container truncated inside header")
    header = data[pos : pos + header_len]
    pos += header_len
    (payload_len,) = _PAYLOAD_LEN.unpack_from(data, pos)
    pos += _PAYLOAD_LEN.size
    if payload_len > _MAX_PAYLOAD:
        raise BitstreamError(f"implausible payload length {payload_len}")
    if len(data) != pos + payload_len + _CRC.size:
        raise BitstreamError(
            f"container length {len(data)} does not match structure "
            f"({pos + payload_len + _CRC.size} expected)"
        )
    payload = memoryview(data)[pos : pos + payload_len]
    (stored_crc,) = _CRC.unpack_from(data, pos + payload_len)
    actual_crc = zlib.crc32(payload) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise BitstreamError(
            f"payload CRC mismatch (stored {stored_crc:#010x}, actual {actual_crc:#010x})"
        )
    return codec_id, header, np.frombuffer(payload, dtype=np.uint8)
