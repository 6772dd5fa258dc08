"""Codec timing and rate measurement over a frame sequence.

Timings use a monotonic clock, repeat each codec call and keep the
per-frame median, and cover only the in-memory encode/decode calls —
file I/O never contributes.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import ConfigError, TdbenchError
from ..frameio import PointCloud
from .distortion import d1_distortion

__all__ = ["CompressionReport", "benchmark_codec"]

_BYTES_PER_POINT = 12  # three float32 coordinates


@dataclass(frozen=True)
class CompressionReport:
    """Per-frame compression outcome: size, timing and distortion."""

    frame_id: int
    point_count: int
    raw_bytes: int
    compressed_bytes: int
    ratio: float
    encode_ms: float
    decode_ms: float
    d1_rmse: float


def _median_ms(fn: Callable[[], object], repetitions: int) -> tuple[object, float]:
    """Run ``fn`` ``repetitions`` times; return its result and median ms."""
    times = []
    result = None
    for _ in range(repetitions):
        t0 = time.perf_counter()
        result = fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return result, statistics.median(times)


def benchmark_codec(
    clouds: Sequence[PointCloud],
    encode_fn: Callable[[PointCloud], bytes],
    decode_fn: Callable[[bytes], PointCloud],
    repetitions: int = 3,
    frame_ids: Sequence[int] | None = None,
) -> list[CompressionReport]:
    """Measure one codec over ``clouds``, one report per frame.

    ``repetitions`` (at least 3) encode and decode calls are timed per
    frame and the medians reported.  Codec failures are re-raised with the
    offending frame id prefixed to the message.
    """
    if repetitions < 3:
        raise ConfigError(f"repetitions must be at least 3, got {repetitions}")
    if frame_ids is None:
        frame_ids = list(range(len(clouds)))
    elif len(frame_ids) != len(clouds):
        raise ConfigError(
            f"got {len(frame_ids)} frame ids for {len(clouds)} clouds"
        )

    reports: list[CompressionReport] = []
    for frame_id, cloud in zip(frame_ids, clouds):
        try:
            blob, encode_ms = _median_ms(lambda: encode_fn(cloud), repetitions)
            recon, decode_ms = _median_ms(lambda: decode_fn(blob), repetitions)
        except TdbenchError as exc:
            raise type(exc)(f"frame {frame_id}: {exc}") from exc

        n = len(cloud.xyz)
        raw = n * _BYTES_PER_POINT
        d1 = (
            d1_distortion(cloud, recon)
            if n > 0 and len(recon.xyz) > 0
            else 0.0
        )
        reports.append(
            CompressionReport(
                frame_id=frame_id,
                point_count=n,
                raw_bytes=raw,
                compressed_bytes=len(blob),
                ratio=raw / len(blob) if len(blob) else float("inf"),
                encode_ms=encode_ms,
                decode_ms=decode_ms,
                d1_rmse=d1,
            )
        )
    return reports
