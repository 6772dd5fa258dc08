"""Quantize-and-pack codec.

Each axis is uniformly quantized to ``q_bits`` bits over the cloud's own
bounding box (no deduplication: the point count is always preserved).  The
``level`` knob trades speed for size:

* ``0``  — quantized indices bit-packed in input order;
* ``5``  — points sorted by Morton code, consecutive codes delta-coded and
  written as varints (order changes, count does not);
* ``10`` — the level-5 varint stream additionally passed through an adaptive
  binary range coder; the smaller of the two byte streams is kept, so a
  level-10 payload is never larger than level 5's.

Reconstruction error per axis is at most half a quantization step:
``extent / (2**q_bits - 1) / 2``.  A single-point cloud has zero extent and
round-trips exactly at any setting.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import BitstreamError, ConfigError, FrameDataError
from ..geometry import PointCloud
from . import container

__all__ = ["QuantConfig", "GRID", "encode", "decode"]

_HEADER = struct.Struct("<3BQQ6d")
# q_bits, level, payload mode, point count, varint byte count (mode 2 only),
# bbox min xyz, bbox max xyz

_MODE_PACKED = 0
_MODE_VARINT = 1
_MODE_RANGE_CODED = 2

_LEVELS = (0, 5, 10)


@dataclass(frozen=True)
class QuantConfig:
    """Codec parameters: per-axis bit depth and compression level."""

    q_bits: int
    level: int

    def __post_init__(self) -> None:
        if not 8 <= self.q_bits <= 16:
            raise ConfigError(f"q_bits must be in [8, 16], got {self.q_bits}")
        if self.level not in _LEVELS:
            raise ConfigError(f"level must be one of {_LEVELS}, got {self.level}")

    @property
    def name(self) -> str:
        """Compact grid label, e.g. q_bits=11 level=5 -> '1105'."""
        return f"{self.q_bits}{self.level:02d}"


#: The benchmark grid: bit depths 8-11 crossed with all three levels.
GRID: tuple[QuantConfig, ...] = tuple(
    QuantConfig(q_bits=q, level=c) for q in (8, 9, 10, 11) for c in _LEVELS
)


def encode(cloud: PointCloud, config: QuantConfig) -> bytes:
    """Compress a cloud; never drops or merges points."""
    n = len(cloud)

    if n == 0:
        header = _HEADER.pack(
            config.q_bits, config.level, _MODE_PACKED, 0, 0, *([0.0] * 6)
        )
        return container.build(container.CODEC_QUANT, header, b"")

    bbox_min, bbox_max, finite = kernels.bounds3(cloud.xyz)
    if not finite:
        raise FrameDataError("cannot encode non-finite coordinates")

    nbins = (1 << config.q_bits) - 1
    step = (bbox_max - bbox_min) / nbins  # 0.0 on degenerate axes

    aux_len = 0
    if config.level == 0:
        mode = _MODE_PACKED
        k = kernels.quantize_rint(cloud.xyz, bbox_min, step, nbins)
        payload = kernels.pack_fixed(k.ravel(), config.q_bits).tobytes()
    else:
        codes = np.sort(kernels.quantize_rint_morton(cloud.xyz, bbox_min, step, nbins))
        varints = kernels.delta_varint_encode(codes)
        if config.level == 5:
            mode = _MODE_VARINT
            payload = varints.tobytes()
        else:
            coded = kernels.rc_bytes_encode(varints)
            if len(coded) < len(varints):
                mode = _MODE_RANGE_CODED
                payload = coded.tobytes()
                aux_len = len(varints)
            else:
                mode = _MODE_VARINT
                payload = varints.tobytes()

    header = _HEADER.pack(
        config.q_bits,
        config.level,
        mode,
        n,
        aux_len,
        *(float(v) for v in bbox_min),
        *(float(v) for v in bbox_max),
    )
    return container.build(container.CODEC_QUANT, header, payload)


def decode(data: bytes) -> PointCloud:
    """Decompress a container produced by :func:`encode`."""
    codec_id, header, payload = container.parse(data)
    if codec_id != container.CODEC_QUANT:
        raise BitstreamError(f"expected quantize codec id, found {codec_id}")
    config, mode, n, aux_len, bbox_min, bbox_max = parse_header(header)

    if n == 0:
        return PointCloud(np.zeros((0, 3), dtype=np.float64))

    nbins = (1 << config.q_bits) - 1
    step = (bbox_max - bbox_min) / nbins  # 0.0 on degenerate axes
    try:
        if mode == _MODE_PACKED:
            expected = (3 * n * config.q_bits + 7) // 8
            if len(payload) != expected:
                raise ValueError(
                    f"packed payload is {len(payload)} bytes, expected {expected}"
                )
            xyz = kernels.unpack_dequantize(payload, config.q_bits, n, bbox_min, step)
        else:
            if mode == _MODE_RANGE_CODED:
                varints = kernels.rc_bytes_decode(payload, aux_len)
            else:
                varints = payload
            codes = kernels.delta_varint_decode(varints, n)
            xyz = kernels.morton_dequantize(codes, bbox_min, step)
    except ValueError as exc:
        raise BitstreamError(f"quantized payload invalid: {exc}") from exc

    return PointCloud(xyz)


def parse_header(
    header: bytes,
) -> tuple[QuantConfig, int, int, int, np.ndarray, np.ndarray]:
    """Unpack a quantize header: (config, mode, count, aux_len, bbox min/max)."""
    if len(header) != _HEADER.size:
        raise BitstreamError(
            f"quantize header is {len(header)} bytes, expected {_HEADER.size}"
        )
    q_bits, level, mode, n, aux_len, *bbox = _HEADER.unpack(header)
    if mode not in (_MODE_PACKED, _MODE_VARINT, _MODE_RANGE_CODED):
        raise BitstreamError(f"unknown payload mode {mode}")
    bbox_min = np.array(bbox[:3])
    bbox_max = np.array(bbox[3:])
    if not (np.isfinite(bbox_min).all() and np.isfinite(bbox_max).all()):
        raise BitstreamError("quantize header carries non-finite bounds")
    if np.any(bbox_max < bbox_min):
        raise BitstreamError("quantize header bounds are inverted")
    try:
        config = QuantConfig(q_bits=q_bits, level=level)
    except ConfigError as exc:
        raise BitstreamError(str(exc)) from exc
    return config, mode, n, aux_len, bbox_min, bbox_max
