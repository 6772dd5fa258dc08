"""Experiment orchestrator: corpus → codecs → detector → AP → uplink.

``run_pipeline`` executes the full study for one :class:`ExperimentSpec`:
generate (or reuse) the labeled corpus, sweep every codec configuration,
re-detect on each reconstruction, score average precision, benchmark codec
timings, replay the measured size/time traces through the uplink
simulator, and check the result against the built-in service-requirement
profiles.  Outputs are CSV tables plus a machine-readable ``summary.json``
and a ``MANIFEST.json`` written last (its absence marks a partial run).

Determinism contract: all columns are reproducible byte-for-byte across
reruns of the same spec except wall-clock measurements, which live in
columns suffixed ``_measured`` (or under ``"measured"`` keys in JSON) and
are excluded from :func:`deterministic_fingerprint`.  The corpus is cached
content-addressed by the semantic scene configuration; set
``TDBENCH_CACHE_DIR`` to relocate the cache.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import shutil
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Sequence

from .codecs import (
    PRESETS,
    QUANT_GRID,
    OctreeConfig,
    QuantConfig,
    decode_octree,
    decode_quant,
    encode_octree,
    encode_quant,
)
from .detect import Detection, DetectorParams, detect
from .errors import ConfigError, StageError, TdbenchError
from .frameio import load_frame
from .geometry import ClassLabel, LabeledFrame, PointCloud
from .metrics import ApConfig, benchmark_codec, evaluate_corpus, frame_mean_ap
from .metrics.bench import CompressionReport
from .netsim import NetworkScenario, check_compliance, simulate
from .profiles import PROFILES
from .scenegen import SceneConfig, generate_corpus, load_manifest

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentSpec",
    "PipelineResult",
    "run_pipeline",
    "spec_hash",
    "canonical_json",
    "deterministic_fingerprint",
    "atomic_write_bytes",
    "atomic_write_text",
    "config_grid",
]

SCHEMA_VERSION = 1
_RAW_BYTES_PER_POINT = 12  # three float32 coordinates on the wire
_CACHE_ENV = "TDBENCH_CACHE_DIR"

TABLE_FILES = {
    "sizes": "sizes.csv",
    "ap": "ap.csv",
    "delays": "delays.csv",
    "compliance": "compliance.csv",
}


# ---------------------------------------------------------------------------
# Spec


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one pipeline run depends on, semantically.

    Two specs that canonicalize to the same JSON share a cache key and
    must produce byte-identical deterministic outputs.
    """

    scene: SceneConfig = field(default_factory=SceneConfig)
    n_frames: int = 30
    include_raw: bool = True
    octree_presets: tuple[str, ...] = ("p0", "p1", "p2", "p3")
    quant_configs: tuple[QuantConfig, ...] = QUANT_GRID
    detector: DetectorParams = field(default_factory=DetectorParams)
    ap: ApConfig = field(default_factory=ApConfig)
    scenario: NetworkScenario = field(default_factory=NetworkScenario)
    repetitions: int = 3
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.n_frames <= 0:
            raise ConfigError(f"n_frames must be positive, got {self.n_frames}")
        if not (self.include_raw or self.octree_presets or self.quant_configs):
            raise ConfigError("codec grid is empty and raw is excluded")
        for preset in self.octree_presets:
            if preset not in PRESETS:
                raise ConfigError(
                    f"unknown octree preset {preset!r}; known: {sorted(PRESETS)}"
                )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentSpec":
        """Build a spec from a parsed config mapping (TOML/JSON section)."""
        if not isinstance(data, Mapping):
            raise ConfigError("experiment config must be a mapping")
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown experiment config keys: {sorted(extra)}")
        kwargs: dict[str, Any] = {}
        if "scene" in data:
            kwargs["scene"] = _dataclass_from_dict(SceneConfig, data["scene"], "scene")
        if "detector" in data:
            kwargs["detector"] = _dataclass_from_dict(
                DetectorParams, data["detector"], "detector"
            )
        if "scenario" in data:
            kwargs["scenario"] = _dataclass_from_dict(
                NetworkScenario, data["scenario"], "scenario"
            )
        if "ap" in data:
            kwargs["ap"] = _ap_from_dict(data["ap"])
        if "octree_presets" in data:
            kwargs["octree_presets"] = tuple(str(p) for p in data["octree_presets"])
        if "quant_configs" in data:
            kwargs["quant_configs"] = tuple(
                _dataclass_from_dict(QuantConfig, q, "quant_configs[]")
                for q in data["quant_configs"]
            )
        for key in ("n_frames", "include_raw", "repetitions", "out_dir"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        """Semantic content as plain JSON-serializable data."""
        return {
            "scene": _dataclass_to_dict(self.scene),
            "n_frames": int(self.n_frames),
            "include_raw": bool(self.include_raw),
            "octree_presets": list(self.octree_presets),
            "quant_configs": [_dataclass_to_dict(q) for q in self.quant_configs],
            "detector": _dataclass_to_dict(self.detector),
            "ap": {
                "recall_thresholds": [float(r) for r in self.ap.recall_thresholds],
                "iou_thresholds": {
                    label.name.title(): float(thr)
                    for label, thr in sorted(
                        self.ap.iou_thresholds.items(), key=lambda kv: kv[0].value
                    )
                },
            },
            "scenario": _dataclass_to_dict(self.scenario),
            "repetitions": int(self.repetitions),
        }


def _dataclass_from_dict(cls: type, data: Mapping[str, Any], where: str) -> Any:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")
    return cls(**dict(data))


def _dataclass_to_dict(obj: Any) -> dict[str, Any]:
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, float):
            value = float(value)
        out[f.name] = value
    return out


def _ap_from_dict(data: Mapping[str, Any]) -> ApConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("ap must be a mapping")
    extra = set(data) - {"recall_thresholds", "iou_thresholds"}
    if extra:
        raise ConfigError(f"unknown ap keys: {sorted(extra)}")
    kwargs: dict[str, Any] = {}
    if "recall_thresholds" in data:
        kwargs["recall_thresholds"] = tuple(float(r) for r in data["recall_thresholds"])
    if "iou_thresholds" in data:
        by_name = {label.name.title(): label for label in ClassLabel}
        thresholds = {}
        for name, thr in data["iou_thresholds"].items():
            if name not in by_name:
                raise ConfigError(f"unknown class {name!r} in ap.iou_thresholds")
            thresholds[by_name[name]] = float(thr)
        kwargs["iou_thresholds"] = thresholds
    return ApConfig(**kwargs)


def canonical_json(data: Any) -> str:
    """Minimal, key-sorted JSON; the formatting-independent identity."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def spec_hash(spec: ExperimentSpec) -> str:
    """Content hash of a spec's semantic fields (output dir excluded)."""
    return hashlib.sha256(canonical_json(spec.to_dict()).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Codec grid


def config_grid(
    spec: ExperimentSpec,
) -> list[tuple[str, Callable[[PointCloud], bytes] | None, Callable[[bytes], PointCloud] | None]]:
    """(config id, encode, decode) triples; raw has no codec functions."""
    grid: list[tuple[str, Any, Any]] = []
    if spec.include_raw:
        grid.append(("raw", None, None))
    for preset in spec.octree_presets:
        cfg = PRESETS[preset]
        grid.append(
            (
                f"octree-{preset}",
                lambda c, cfg=cfg: encode_octree(c, cfg),
                decode_octree,
            )
        )
    for qcfg in spec.quant_configs:
        grid.append(
            (
                f"quant-q{qcfg.q_bits}-c{qcfg.level}",
                lambda c, qcfg=qcfg: encode_quant(c, qcfg),
                decode_quant,
            )
        )
    return grid


# ---------------------------------------------------------------------------
# Atomic writes and fingerprints


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _strip_measured_csv(text: str) -> str:
    """Drop ``*_measured`` columns; what remains must be reproducible."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return ""
    header = rows[0]
    keep = [i for i, name in enumerate(header) if not name.endswith("_measured")]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in rows:
        writer.writerow([row[i] for i in keep])
    return out.getvalue()


def _strip_measured_json(node: Any) -> Any:
    if isinstance(node, dict):
        return {
            k: _strip_measured_json(v)
            for k, v in node.items()
            if k != "measured" and not k.endswith("_measured")
        }
    if isinstance(node, list):
        return [_strip_measured_json(v) for v in node]
    return node


def deterministic_fingerprint(path: str | os.PathLike) -> str:
    """SHA-256 of a bundle file's reproducible content.

    Wall-clock data (``*_measured`` CSV columns, ``measured`` JSON keys)
    is removed first; everything else must match across reruns.
    """
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".csv":
        content = _strip_measured_csv(raw.decode("utf-8")).encode("utf-8")
    elif path.suffix == ".json":
        content = canonical_json(_strip_measured_json(json.loads(raw))).encode("utf-8")
    else:
        content = raw
    return hashlib.sha256(content).hexdigest()


# ---------------------------------------------------------------------------
# Corpus cache


def _cache_dir(spec: ExperimentSpec) -> Path:
    env = os.environ.get(_CACHE_ENV)
    return Path(env) if env else Path(spec.out_dir) / "cache"


def _corpus_key(spec: ExperimentSpec) -> str:
    payload = {"scene": _dataclass_to_dict(spec.scene), "n_frames": spec.n_frames}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def ensure_corpus(spec: ExperimentSpec) -> Path:
    """Generate the corpus once per semantic scene config; reuse after."""
    cache = _cache_dir(spec)
    cache.mkdir(parents=True, exist_ok=True)
    corpus = cache / f"corpus-{_corpus_key(spec)[:16]}"
    if (corpus / "manifest.json").exists():
        return corpus
    staging = corpus.with_name(corpus.name + f".tmp-{os.getpid()}")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    generate_corpus(spec.scene, spec.n_frames, staging)
    try:
        os.rename(staging, corpus)
    except OSError:
        # Another process finished first; its corpus is identical.
        shutil.rmtree(staging, ignore_errors=True)
        if not (corpus / "manifest.json").exists():
            raise
    return corpus


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class PipelineResult:
    out_dir: Path
    spec_hash: str
    tables: dict[str, Path]
    summary_path: Path
    manifest_path: Path
    summary: dict[str, Any]


@contextmanager
def _stage(name: str, config_id: str, out_dir: Path) -> Iterator[None]:
    """Abort with the stage name and config id; mark the run as failed."""
    try:
        yield
    except TdbenchError as exc:
        marker = {"failed_stage": name, "config": config_id, "error": str(exc)}
        atomic_write_text(out_dir / "FAILED.json", json.dumps(marker, indent=2) + "\n")
        raise StageError(f"stage {name!r} failed for config {config_id!r}: {exc}") from exc


def _detect_all(
    clouds: Sequence[PointCloud], params: DetectorParams
) -> tuple[dict[int, list[Detection]], list[float]]:
    """Run the detector per frame, timing each call."""
    detections: dict[int, list[Detection]] = {}
    times: list[float] = []
    for i, cloud in enumerate(clouds):
        t0 = time.perf_counter()
        detections[i] = detect(cloud, params)
        times.append((time.perf_counter() - t0) * 1000.0)
    return detections, times


def _raw_reports(clouds: Sequence[PointCloud]) -> list[CompressionReport]:
    reports = []
    for i, cloud in enumerate(clouds):
        raw = len(cloud) * _RAW_BYTES_PER_POINT
        reports.append(
            CompressionReport(
                frame_id=i,
                point_count=len(cloud),
                raw_bytes=raw,
                compressed_bytes=raw,
                ratio=1.0,
                encode_ms=0.0,
                decode_ms=0.0,
                d1_rmse=0.0,
            )
        )
    return reports


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, out.getvalue())


def run_pipeline(spec: ExperimentSpec) -> PipelineResult:
    """Execute the full study; see the module docstring for the contract."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed_marker = out_dir / "FAILED.json"
    if failed_marker.exists():
        failed_marker.unlink()
    run_hash = spec_hash(spec)
    atomic_write_text(
        out_dir / "spec.json",
        json.dumps({"spec_hash": run_hash, "spec": spec.to_dict()}, indent=2, sort_keys=True)
        + "\n",
    )

    with _stage("generate", "-", out_dir):
        corpus_dir = ensure_corpus(spec)
        manifest = load_manifest(corpus_dir)
        frames: dict[int, LabeledFrame] = {}
        for entry in manifest:
            frame = load_frame(corpus_dir / entry["path"])
            frames[entry["frame_id"]] = frame
        frame_ids = sorted(frames)
        clouds = [frames[i].cloud for i in frame_ids]

    # Warm the detector's compiled kernels so per-frame timings are honest.
    if clouds:
        detect(clouds[0], spec.detector)

    sizes_rows: list[list[Any]] = []
    ap_rows: list[list[Any]] = []
    delay_rows: list[list[Any]] = []
    compliance_rows: list[list[Any]] = []
    per_config: dict[str, dict[str, Any]] = {}

    for config_id, encode_fn, decode_fn in config_grid(spec):
        with _stage("bench", config_id, out_dir):
            if encode_fn is None:
                reports = _raw_reports(clouds)
                recons = list(clouds)
            else:
                reports = benchmark_codec(
                    clouds, encode_fn, decode_fn, spec.repetitions, frame_ids
                )
                recons = [decode_fn(encode_fn(c)) for c in clouds]

        with _stage("detect", config_id, out_dir):
            detections, inference_ms = _detect_all(recons, spec.detector)
            detections = {frame_ids[i]: d for i, d in detections.items()}

        with _stage("eval", config_id, out_dir):
            fmap = frame_mean_ap(detections, frames, spec.ap)
            corpus_ap = evaluate_corpus(detections, frames, spec.ap)

        with _stage("simulate", config_id, out_dir):
            size_trace = [r.compressed_bytes for r in reports]
            _, summary = simulate(
                spec.scenario,
                [size_trace] * spec.scenario.n_vehicles,
                encode_ms=[r.encode_ms for r in reports],
                decode_ms=[r.decode_ms for r in reports],
                inference_ms=inference_ms,
            )
            compliance = [check_compliance(summary, profile) for profile in PROFILES]

        for r in reports:
            sizes_rows.append(
                [
                    SCHEMA_VERSION,
                    config_id,
                    r.frame_id,
                    r.point_count,
                    r.raw_bytes,
                    r.compressed_bytes,
                    r.ratio,
                    r.d1_rmse,
                    r.encode_ms,
                    r.decode_ms,
                ]
            )
        for label in sorted(ClassLabel, key=lambda c: c.value):
            result = corpus_ap[label]
            ap_rows.append(
                [
                    SCHEMA_VERSION,
                    config_id,
                    label.name.title(),
                    fmap[label],
                    result.ap,
                    result.n_gt,
                    result.tp,
                    result.fp,
                ]
            )
        delay_rows.append(
            [
                SCHEMA_VERSION,
                config_id,
                summary.frames_generated,
                summary.frames_delivered,
                summary.frames_dropped,
                summary.mean_frame_bytes,
                summary.required_rate_bps / 1e6,
                summary.mean_queue_ms,
                summary.p95_queue_ms,
                summary.mean_tx_ms,
                summary.p95_tx_ms,
                summary.mean_encode_ms,
                summary.p95_encode_ms,
                summary.mean_decode_ms,
                summary.p95_decode_ms,
                summary.mean_inference_ms,
                summary.p95_inference_ms,
                summary.mean_total_ms,
                summary.p95_total_ms,
                summary.mean_total_excl_codec_ms,
                summary.p95_total_excl_codec_ms,
            ]
        )
        for report in compliance:
            profile = report.profile
            compliance_rows.append(
                [
                    SCHEMA_VERSION,
                    config_id,
                    profile.name,
                    profile.max_delay_ms,
                    profile.min_datarate_mbps,
                    report.required_rate_mbps,
                    report.datarate_pass,
                    report.datarate_margin_mbps,
                    "not evaluated" if profile.reliability_pct is not None else "",
                    report.delay_ms_with_codec,
                    report.delay_ms_excl_codec,
                    report.delay_pass_with_codec,
                    report.delay_pass_excl_codec,
                ]
            )

        per_config[config_id] = {
            "median_compressed_bytes": _median([r.compressed_bytes for r in reports]),
            "median_ratio": _median([r.ratio for r in reports]),
            "median_d1_rmse": _median([r.d1_rmse for r in reports]),
            "required_rate_mbps": summary.required_rate_bps / 1e6,
            "frames_dropped": summary.frames_dropped,
            "ap": {
                label.name.title(): {
                    "frame_mean_ap": fmap[label],
                    "corpus_ap": corpus_ap[label].ap,
                    "n_gt": corpus_ap[label].n_gt,
                }
                for label in sorted(ClassLabel, key=lambda c: c.value)
            },
            "measured": {
                "median_encode_ms": _median([r.encode_ms for r in reports]),
                "median_decode_ms": _median([r.decode_ms for r in reports]),
                "mean_inference_ms": sum(inference_ms) / len(inference_ms)
                if inference_ms
                else 0.0,
                "mean_total_ms": summary.mean_total_ms,
                "mean_total_excl_codec_ms": summary.mean_total_excl_codec_ms,
            },
        }

    with _stage("write-tables", "-", out_dir):
        tables = {name: out_dir / fname for name, fname in TABLE_FILES.items()}
        _write_csv(
            tables["sizes"],
            [
                "schema_version",
                "config",
                "frame",
                "points",
                "raw_bytes",
                "compressed_bytes",
                "ratio",
                "d1_rmse",
                "encode_ms_measured",
                "decode_ms_measured",
            ],
            sizes_rows,
        )
        _write_csv(
            tables["ap"],
            [
                "schema_version",
                "config",
                "class",
                "frame_mean_ap",
                "corpus_ap",
                "n_gt",
                "tp",
                "fp",
            ],
            ap_rows,
        )
        _write_csv(
            tables["delays"],
            [
                "schema_version",
                "config",
                "frames_generated",
                "frames_delivered",
                "frames_dropped",
                "mean_frame_bytes",
                "required_rate_mbps",
                "mean_queue_ms_measured",
                "p95_queue_ms_measured",
                "mean_tx_ms_measured",
                "p95_tx_ms_measured",
                "mean_encode_ms_measured",
                "p95_encode_ms_measured",
                "mean_decode_ms_measured",
                "p95_decode_ms_measured",
                "mean_inference_ms_measured",
                "p95_inference_ms_measured",
                "mean_total_ms_measured",
                "p95_total_ms_measured",
                "mean_total_excl_codec_ms_measured",
                "p95_total_excl_codec_ms_measured",
            ],
            delay_rows,
        )
        _write_csv(
            tables["compliance"],
            [
                "schema_version",
                "config",
                "profile",
                "max_delay_ms",
                "min_datarate_mbps",
                "required_rate_mbps",
                "datarate_pass",
                "datarate_margin_mbps",
                "reliability",
                "delay_with_codec_ms_measured",
                "delay_excl_codec_ms_measured",
                "delay_pass_with_codec_measured",
                "delay_pass_excl_codec_measured",
            ],
            compliance_rows,
        )

        summary_doc = {
            "schema_version": SCHEMA_VERSION,
            "spec_hash": run_hash,
            "n_frames": spec.n_frames,
            "configs": [cid for cid, _, _ in config_grid(spec)],
            "per_config": per_config,
        }
        summary_path = out_dir / "summary.json"
        atomic_write_text(
            summary_path, json.dumps(summary_doc, indent=2, sort_keys=True) + "\n"
        )

        manifest_path = out_dir / "MANIFEST.json"
        files = [*TABLE_FILES.values(), "summary.json", "spec.json"]
        manifest_doc = {
            "schema_version": SCHEMA_VERSION,
            "spec_hash": run_hash,
            "complete": True,
            "files": {
                name: deterministic_fingerprint(out_dir / name) for name in sorted(files)
            },
        }
        atomic_write_text(
            manifest_path, json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n"
        )

    return PipelineResult(
        out_dir=out_dir,
        spec_hash=run_hash,
        tables=tables,
        summary_path=summary_path,
        manifest_path=manifest_path,
        summary=summary_doc,
    )


def _median(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0
