"""Command-line front end.

Subcommands mirror the pipeline stages — ``generate``, ``encode``,
``decode``, ``detect``, ``eval``, ``bench``, ``simulate``, ``pipeline``,
``charts`` — plus ``kernel-bench``, which times the compiled kernels
against the pure-numpy reference backend.  Every command accepts
``--config <file>`` (TOML or JSON; command-line flags win over file
values) and ``--out``.

Exit codes: 0 on success, 2 for configuration errors (including bad
flags), 3 for a stage failure at runtime.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
import time
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .codecs import (
    PRESETS,
    QUANT_GRID,
    QuantConfig,
    decode_any,
    decode_octree,
    decode_quant,
    encode_octree,
    encode_quant,
)
from .detect import DetectorParams, detect, load_detections, save_detections
from .errors import ConfigError, TdbenchError
from .frameio import load_frame, save_frame
from .geometry import ClassLabel, LabeledFrame, PointCloud
from .metrics import ApConfig, evaluate_corpus, frame_mean_ap
from .netsim import NetworkScenario, check_compliance, simulate
from .pipeline import (
    SCHEMA_VERSION,
    ExperimentSpec,
    _ap_from_dict,
    _dataclass_from_dict,
    atomic_write_text,
    run_pipeline,
)
from .profiles import PROFILES
from .scenegen import SceneConfig, generate_corpus, load_manifest

__all__ = ["main", "build_parser"]


# ---------------------------------------------------------------------------
# Config files


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # Python 3.11+
        except ImportError:  # pragma: no cover - depends on interpreter
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except Exception as exc:
            raise ConfigError(f"cannot parse TOML config {p}: {exc}") from exc
    if p.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse JSON config {p}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {p} must hold a mapping at top level")
        return data
    raise ConfigError(f"config {p} must be .toml or .json")


def _check_keys(config: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = set(config) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where} config: {sorted(extra)}")


# ---------------------------------------------------------------------------
# Codec ids


def _codec_by_id(codec_id: str) -> tuple[Callable[[PointCloud], bytes], Callable[[bytes], PointCloud]]:
    """Map a config id like ``octree-p1`` / ``quant-q11-c0`` to its codec."""
    if codec_id.startswith("octree-"):
        preset = codec_id[len("octree-"):]
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown octree preset in {codec_id!r}; known: {sorted(PRESETS)}"
            )
        cfg = PRESETS[preset]
        return (lambda c: encode_octree(c, cfg)), decode_octree
    if codec_id.startswith("quant-q"):
        body = codec_id[len("quant-"):]
        try:
            q_part, c_part = body.split("-")
            qcfg = QuantConfig(q_bits=int(q_part[1:]), level=int(c_part[1:]))
        except (ValueError, IndexError) as exc:
            raise ConfigError(
                f"malformed quant codec id {codec_id!r}; expected quant-q<bits>-c<level>"
            ) from exc
        return (lambda c: encode_quant(c, qcfg)), decode_quant
    raise ConfigError(
        f"unknown codec id {codec_id!r}; expected octree-<preset> or quant-q<bits>-c<level>"
    )


# ---------------------------------------------------------------------------
# Frame inputs


def _iter_frames(paths: Sequence[str]) -> list[tuple[int, LabeledFrame]]:
    """Load frames from corpus directories and/or individual frame files."""
    if not paths:
        raise ConfigError("no input frames given")
    frames: list[tuple[int, LabeledFrame]] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            for entry in load_manifest(p):
                frame = load_frame(p / entry["path"])
                frames.append((int(entry["frame_id"]), frame))
        elif p.exists():
            frame = load_frame(p)
            frames.append((frame.frame_id, frame))
        else:
            raise ConfigError(f"input not found: {p}")
    return frames


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"scene", "n_frames"}, "generate")
    scene = _dataclass_from_dict(SceneConfig, config.get("scene", {}), "scene")
    if args.seed is not None:
        scene = dataclasses.replace(scene, seed=args.seed)
    n_frames = args.frames if args.frames is not None else int(config.get("n_frames", 30))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = generate_corpus(scene, n_frames, out)
    print(f"generated {len(manifest)} frames in {out}")
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"codec"}, "encode")
    codec_id = args.codec or config.get("codec")
    if not codec_id:
        raise ConfigError("encode needs --codec (or 'codec' in the config file)")
    encode_fn, _ = _codec_by_id(codec_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    total = 0
    frames = _iter_frames(args.inputs)
    for frame_id, frame in frames:
        blob = encode_fn(frame.cloud)
        total += len(blob)
        path = out / f"frame_{frame_id:05d}.{codec_id}.tdc1"
        path.write_bytes(blob)
    print(f"encoded {len(frames)} frames ({total} bytes) with {codec_id} into {out}")
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    _check_keys(_load_config(args.config), set(), "decode")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for raw in args.inputs:
        p = Path(raw)
        if not p.exists():
            raise ConfigError(f"input not found: {p}")
        cloud = decode_any(p.read_bytes())
        frame = LabeledFrame(
            frame_id=count, cloud=cloud, boxes=[], labels=[], occluded=[]
        )
        save_frame(out / (p.stem.split(".")[0] + ".tdbf"), frame)
        count += 1
    print(f"decoded {count} frames into {out}")
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"detector"}, "detect")
    params = _dataclass_from_dict(DetectorParams, config.get("detector", {}), "detector")
    frames = _iter_frames(args.inputs)
    detections = {fid: detect(frame.cloud, params) for fid, frame in frames}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_detections(out, detections)
    n = sum(len(d) for d in detections.values())
    print(f"detected {n} objects over {len(frames)} frames -> {out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"ap"}, "eval")
    ap_config = _ap_from_dict(config.get("ap", {})) if config.get("ap") else ApConfig()
    detections = load_detections(args.detections)
    frames = dict(_iter_frames([args.corpus]))
    fmap = frame_mean_ap(detections, frames, ap_config)
    corpus_ap = evaluate_corpus(detections, frames, ap_config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label in sorted(ClassLabel, key=lambda c: c.value):
        result = corpus_ap[label]
        rows.append(
            ",".join(
                str(v)
                for v in (
                    SCHEMA_VERSION,
                    label.name.title(),
                    repr(fmap[label]),
                    repr(result.ap),
                    result.n_gt,
                    result.tp,
                    result.fp,
                )
            )
        )
        print(
            f"{label.name.title()}: frame-mean AP {fmap[label]:.4f}, "
            f"corpus AP {result.ap:.4f} ({result.n_gt} gt)"
        )
    header = "schema_version,class,frame_mean_ap,corpus_ap,n_gt,tp,fp"
    atomic_write_text(out / "ap.csv", "\n".join([header, *rows]) + "\n")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    from .metrics import benchmark_codec

    config = _load_config(args.config)
    _check_keys(config, {"codecs", "repetitions"}, "bench")
    codec_ids = list(args.codec or config.get("codecs") or [])
    if not codec_ids:
        codec_ids = [f"octree-{p}" for p in sorted(PRESETS)] + [
            f"quant-q{q.q_bits}-c{q.level}"
            for q in sorted(QUANT_GRID, key=lambda q: (q.q_bits, q.level))
        ]
    repetitions = args.repetitions or int(config.get("repetitions", 3))
    frames = _iter_frames([args.corpus])
    frame_ids = [fid for fid, _ in frames]
    clouds = [frame.cloud for _, frame in frames]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        "schema_version,config,frame,points,raw_bytes,compressed_bytes,ratio,"
        "d1_rmse,encode_ms_measured,decode_ms_measured"
    ]
    for codec_id in codec_ids:
        encode_fn, decode_fn = _codec_by_id(codec_id)
        reports = benchmark_codec(clouds, encode_fn, decode_fn, repetitions, frame_ids)
        for r in reports:
            lines.append(
                f"{SCHEMA_VERSION},{codec_id},{r.frame_id},{r.point_count},"
                f"{r.raw_bytes},{r.compressed_bytes},{r.ratio!r},{r.d1_rmse!r},"
                f"{r.encode_ms!r},{r.decode_ms!r}"
            )
        med = statistics.median([r.compressed_bytes for r in reports])
        print(f"{codec_id}: median {med/1000:.1f} KB over {len(reports)} frames")
    atomic_write_text(out / "sizes.csv", "\n".join(lines) + "\n")
    return 0


def _read_sizes_csv(path: Path, codec_id: str) -> tuple[list[int], list[float], list[float]]:
    if not path.exists():
        raise ConfigError(f"sizes table not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if r["config"] == codec_id]
    if not rows:
        raise ConfigError(f"no rows for config {codec_id!r} in {path}")
    rows.sort(key=lambda r: int(r["frame"]))
    sizes = [int(r["compressed_bytes"]) for r in rows]
    enc = [float(r["encode_ms_measured"]) for r in rows]
    dec = [float(r["decode_ms_measured"]) for r in rows]
    return sizes, enc, dec


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"scenario", "inference_ms"}, "simulate")
    scenario = _dataclass_from_dict(
        NetworkScenario, config.get("scenario", {}), "scenario"
    )
    if args.trace:
        trace = _load_config(args.trace)
        _check_keys(
            trace, {"sizes", "encode_ms", "decode_ms", "inference_ms"}, "trace"
        )
        if "sizes" not in trace:
            raise ConfigError("trace file must define 'sizes'")
        sizes = [int(s) for s in trace["sizes"]]
        enc = trace.get("encode_ms", 0.0)
        dec = trace.get("decode_ms", 0.0)
        inf = trace.get("inference_ms", config.get("inference_ms", 0.0))
    elif args.sizes:
        if not args.codec:
            raise ConfigError("--sizes needs --codec to select the config's rows")
        sizes, enc, dec = _read_sizes_csv(Path(args.sizes), args.codec)
        inf = config.get("inference_ms", 0.0)
    else:
        raise ConfigError("simulate needs --trace or --sizes")

    _, summary = simulate(
        scenario, [sizes] * scenario.n_vehicles, encode_ms=enc, decode_ms=dec,
        inference_ms=inf,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    doc = {
        "frames_generated": summary.frames_generated,
        "frames_delivered": summary.frames_delivered,
        "frames_dropped": summary.frames_dropped,
        "mean_frame_bytes": summary.mean_frame_bytes,
        "required_rate_mbps": summary.required_rate_bps / 1e6,
        "measured": {
            "mean_queue_ms": summary.mean_queue_ms,
            "p95_queue_ms": summary.p95_queue_ms,
            "mean_tx_ms": summary.mean_tx_ms,
            "p95_tx_ms": summary.p95_tx_ms,
            "mean_total_ms": summary.mean_total_ms,
            "p95_total_ms": summary.p95_total_ms,
            "mean_total_excl_codec_ms": summary.mean_total_excl_codec_ms,
            "p95_total_excl_codec_ms": summary.p95_total_excl_codec_ms,
        },
    }
    atomic_write_text(out / "netsim_summary.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")

    header = (
        "schema_version,frames_generated,frames_delivered,frames_dropped,"
        "mean_frame_bytes,required_rate_mbps,mean_queue_ms_measured,"
        "mean_tx_ms_measured,mean_total_ms_measured,mean_total_excl_codec_ms_measured"
    )
    row = (
        f"{SCHEMA_VERSION},{summary.frames_generated},{summary.frames_delivered},"
        f"{summary.frames_dropped},{summary.mean_frame_bytes!r},"
        f"{summary.required_rate_bps / 1e6!r},{summary.mean_queue_ms!r},"
        f"{summary.mean_tx_ms!r},{summary.mean_total_ms!r},"
        f"{summary.mean_total_excl_codec_ms!r}"
    )
    atomic_write_text(out / "netsim_summary.csv", header + "\n" + row + "\n")

    lines = [
        "schema_version,profile,max_delay_ms,min_datarate_mbps,required_rate_mbps,"
        "datarate_pass,delay_with_codec_ms_measured,delay_pass_with_codec_measured,"
        "delay_pass_excl_codec_measured"
    ]
    for profile in PROFILES:
        rep = check_compliance(summary, profile)

        def b(v: bool | None) -> str:
            return "" if v is None else ("true" if v else "false")

        lines.append(
            f"{SCHEMA_VERSION},{profile.name},"
            f"{'' if profile.max_delay_ms is None else profile.max_delay_ms!r},"
            f"{'' if profile.min_datarate_mbps is None else profile.min_datarate_mbps!r},"
            f"{rep.required_rate_mbps!r},{b(rep.datarate_pass)},"
            f"{rep.delay_ms_with_codec!r},{b(rep.delay_pass_with_codec)},"
            f"{b(rep.delay_pass_excl_codec)}"
        )
    atomic_write_text(out / "compliance.csv", "\n".join(lines) + "\n")
    print(
        f"simulated {summary.frames_delivered}/{summary.frames_generated} frames: "
        f"mean total {summary.mean_total_ms:.2f} ms "
        f"({summary.mean_total_excl_codec_ms:.2f} ms excl. codec), "
        f"required rate {summary.required_rate_bps / 1e6:.3f} Mbps"
    )
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    spec = ExperimentSpec.from_dict(config) if config else ExperimentSpec()
    if args.out:
        spec = dataclasses.replace(spec, out_dir=args.out)
    result = run_pipeline(spec)
    print(f"pipeline complete: {result.out_dir} (spec {result.spec_hash[:12]})")
    for name, path in sorted(result.tables.items()):
        print(f"  {name}: {path}")
    print(f"  summary: {result.summary_path}")
    return 0


def _cmd_charts(args: argparse.Namespace) -> int:
    from .charts import render_charts

    _check_keys(_load_config(args.config), set(), "charts")
    paths = render_charts(args.bundle, args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def _kernel_cases(n_points: int, rng: np.random.Generator):
    xyz = rng.uniform(-100.0, 100.0, size=(n_points, 3))
    origin = np.array([-100.0, -100.0, -100.0])
    step = np.array([0.05, 0.05, 0.05])
    boxes_a = np.column_stack(
        [
            rng.uniform(-50, 50, 64),
            rng.uniform(-50, 50, 64),
            rng.uniform(0, 2, 64),
            rng.uniform(2, 5, 64),
            rng.uniform(1, 2, 64),
            rng.uniform(1, 2, 64),
            rng.uniform(-np.pi, np.pi, 64),
        ]
    )
    xy = rng.uniform(-60.0, 60.0, size=(min(n_points, 20000), 2))
    codes, _ = kernels.quantize_floor_morton(xyz, origin, 0.05)
    return {
        "quantize_floor_morton": lambda: kernels.quantize_floor_morton(xyz, origin, 0.05),
        "morton_dequantize": lambda: kernels.morton_dequantize(codes, origin, step),
        "iou3d_matrix": lambda: kernels.iou3d_matrix(boxes_a, boxes_a),
        "cluster_labels": lambda: kernels.cluster_labels(xy, 0.7),
    }


def _cmd_kernel_bench(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_keys(config, {"points", "repeats"}, "kernel-bench")
    n_points = args.points or int(config.get("points", 200_000))
    repeats = args.repeats or int(config.get("repeats", 5))
    results: dict[str, dict[str, float]] = {}
    for backend in ("numba", "numpy"):
        try:
            kernels.set_backend(backend)
            kernels.backend_name()
        except ConfigError as exc:
            print(f"skipping backend {backend}: {exc}", file=sys.stderr)
            kernels.set_backend(None)
            continue
        cases = _kernel_cases(n_points, np.random.default_rng(0))
        for name, fn in cases.items():
            fn()  # warmup (JIT compile on the numba backend)
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn()
                times.append((time.perf_counter() - t0) * 1000.0)
            results.setdefault(name, {})[backend] = statistics.median(times)
        kernels.set_backend(None)

    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, by_backend in results.items():
        nb = by_backend.get("numba")
        np_ms = by_backend.get("numpy")
        speed = (np_ms / nb) if nb and np_ms else float("nan")
        print(
            f"{name:<24}"
            f"{nb if nb is not None else float('nan'):>12.3f}"
            f"{np_ms if np_ms is not None else float('nan'):>12.3f}"
            f"{speed:>10.1f}"
        )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(
            out,
            json.dumps(
                {"points": n_points, "repeats": repeats, "median_ms": results},
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdbench",
        description="LiDAR compression / detection / V2X uplink benchmark suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, func) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML or JSON config file")
        p.set_defaults(func=func)
        return p

    p = add("generate", "synthesize a labeled corpus", _cmd_generate)
    p.add_argument("--out", default="corpus", help="output corpus directory")
    p.add_argument("--frames", type=int, help="number of frames")
    p.add_argument("--seed", type=int, help="override the scene seed")

    p = add("encode", "compress frames with one codec config", _cmd_encode)
    p.add_argument("--out", default="encoded", help="output directory for bitstreams")
    p.add_argument("--codec", help="codec id, e.g. octree-p1 or quant-q11-c0")
    p.add_argument("inputs", nargs="*", help="corpus directories and/or frame files")

    p = add("decode", "reconstruct clouds from bitstreams", _cmd_decode)
    p.add_argument("--out", default="decoded", help="output directory for frames")
    p.add_argument("inputs", nargs="*", help="bitstream files")

    p = add("detect", "run the geometric detector over frames", _cmd_detect)
    p.add_argument("--out", default="detections.json", help="output detections file")
    p.add_argument("inputs", nargs="*", help="corpus directories and/or frame files")

    p = add("eval", "score detections against corpus ground truth", _cmd_eval)
    p.add_argument("--out", default="eval", help="output directory")
    p.add_argument("--detections", required=True, help="detections JSON file")
    p.add_argument("--corpus", required=True, help="labeled corpus directory")

    p = add("bench", "benchmark codec size/time/distortion per frame", _cmd_bench)
    p.add_argument("--out", default="bench", help="output directory")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--codec", action="append", help="codec id (repeatable)")
    p.add_argument("--repetitions", type=int, help="timing repetitions per frame")

    p = add("simulate", "replay a size trace through the uplink model", _cmd_simulate)
    p.add_argument("--out", default="netsim", help="output directory")
    p.add_argument("--sizes", help="sizes.csv from bench/pipeline")
    p.add_argument("--codec", help="config id selecting rows of --sizes")
    p.add_argument("--trace", help="JSON trace file with sizes/encode_ms/decode_ms")

    p = add("pipeline", "run the full experiment pipeline", _cmd_pipeline)
    p.add_argument("--out", help="output bundle directory (overrides config)")

    p = add("charts", "render SVG charts from a pipeline bundle", _cmd_charts)
    p.add_argument("--out", help="chart output directory (default: bundle dir)")
    p.add_argument("bundle", nargs="?", default=".", help="bundle directory")

    p = add("kernel-bench", "compare numba and numpy kernel backends", _cmd_kernel_bench)
    p.add_argument("--out", help="optional JSON report path")
    p.add_argument("--points", type=int, help="synthetic cloud size")
    p.add_argument("--repeats", type=int, help="timing repetitions")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TdbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
