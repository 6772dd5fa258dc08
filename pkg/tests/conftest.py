"""Shared fixtures: the 30-frame benchmark corpus and derived sweeps.

The heavy artifacts (corpus generation, codec sweeps with timing, detector
runs over every reconstruction) are session-scoped so the acceptance tests
and unit tests share one computation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from tdbench.codecs import (
    PRESETS,
    QuantConfig,
    decode_octree,
    decode_quant,
    encode_octree,
    encode_quant,
)
from tdbench.detect import DetectorParams, detect
from tdbench.frameio import load_frame
from tdbench.metrics import benchmark_codec
from tdbench.scenegen import SceneConfig, generate_corpus, load_manifest

CORPUS_SEED = 7
CORPUS_FRAMES = 30

OCTREE_ORDER = ("p0", "p1", "p2", "p3")
QUANT_SWEEP = tuple(QuantConfig(q_bits=q, level=0) for q in (11, 10, 9, 8))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(SceneConfig(seed=CORPUS_SEED), CORPUS_FRAMES, out)
    return out


@pytest.fixture(scope="session")
def corpus_frames(corpus_dir):
    frames = {}
    for entry in load_manifest(corpus_dir):
        frames[entry["frame_id"]] = load_frame(corpus_dir / entry["path"])
    return frames


@pytest.fixture(scope="session")
def corpus_clouds(corpus_frames):
    return [corpus_frames[i].cloud for i in sorted(corpus_frames)]


@dataclass(frozen=True)
class CodecSweep:
    """Per-config benchmark reports over the corpus (sizes, times, d1)."""

    reports: dict  # config id -> list[CompressionReport]


@pytest.fixture(scope="session")
def codec_sweep(corpus_clouds):
    """Benchmark every octree preset and the full quant grid once."""
    from tdbench.codecs import QUANT_GRID

    reports = {}
    for preset in OCTREE_ORDER:
        cfg = PRESETS[preset]
        reports[f"octree-{preset}"] = benchmark_codec(
            corpus_clouds,
            lambda c, cfg=cfg: encode_octree(c, cfg),
            decode_octree,
            repetitions=3,
        )
    for qcfg in QUANT_GRID:
        reports[f"quant-q{qcfg.q_bits}-c{qcfg.level}"] = benchmark_codec(
            corpus_clouds,
            lambda c, qcfg=qcfg: encode_quant(c, qcfg),
            decode_quant,
            repetitions=3,
        )
    return CodecSweep(reports=reports)


@dataclass(frozen=True)
class DetectionSweep:
    """Detections and per-frame inference times per codec config."""

    detections: dict  # config id -> {frame_id: list[Detection]}
    inference_ms: dict  # config id -> list[float]


@pytest.fixture(scope="session")
def detection_sweep(corpus_frames, corpus_clouds):
    """Detector output on raw clouds and on every swept reconstruction."""
    params = DetectorParams()
    detect(corpus_clouds[0], params)  # warm compiled kernels

    frame_ids = sorted(corpus_frames)
    configs: dict[str, list] = {"raw": corpus_clouds}
    for preset in OCTREE_ORDER:
        cfg = PRESETS[preset]
        configs[f"octree-{preset}"] = [
            decode_octree(encode_octree(c, cfg)) for c in corpus_clouds
        ]
    for qcfg in QUANT_SWEEP:
        configs[f"quant-q{qcfg.q_bits}-c{qcfg.level}"] = [
            decode_quant(encode_quant(c, qcfg)) for c in corpus_clouds
        ]

    detections = {}
    inference = {}
    for config_id, clouds in configs.items():
        per_frame = {}
        times = []
        for fid, cloud in zip(frame_ids, clouds):
            t0 = time.perf_counter()
            per_frame[fid] = detect(cloud, params)
            times.append((time.perf_counter() - t0) * 1000.0)
        detections[config_id] = per_frame
        inference[config_id] = times
    return DetectionSweep(detections=detections, inference_ms=inference)
