"""Evaluation metrics: 3D IoU matching, interpolated average precision,
geometric distortion, and the codec timing/size benchmark harness."""

from .ap import (
    ApConfig,
    ApResult,
    PrCurve,
    average_precision,
    evaluate_corpus,
    frame_mean_ap,
    match_detections,
)
from .bench import CompressionReport, benchmark_codec
from .distortion import d1_distortion
from .iou import iou3d

__all__ = [
    "ApConfig",
    "ApResult",
    "PrCurve",
    "average_precision",
    "evaluate_corpus",
    "frame_mean_ap",
    "match_detections",
    "CompressionReport",
    "benchmark_codec",
    "d1_distortion",
    "iou3d",
]
