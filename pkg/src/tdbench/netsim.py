"""Deterministic discrete-event model of a shared V2X uplink.

``n_vehicles`` sensors each produce one compressed frame every ``1/fps``
seconds; frames queue per vehicle and transmit over one shared channel.
The channel's total capacity is ``spectral_efficiency × bandwidth``; at any
instant every vehicle with a frame in flight gets an equal share of it, so
a lone backlogged vehicle uses the full channel (the link is
work-conserving) and symmetric load splits it evenly.  A frame's
transmission time is its bits divided by the share integrated over its
service interval.

The simulator tracks five per-frame delay components — encode, queue,
transmit, decode, inference — and reports the total both with and without
the codec terms, since delay budgets are often quoted for the network
alone.  All clocks are milliseconds; capacities quoted in powers of ten
(bits, Hz) stay exact in binary floating point at that scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "NetworkScenario",
    "DelayBreakdown",
    "FrameRecord",
    "SimulationSummary",
    "RequirementProfile",
    "ComplianceReport",
    "simulate",
    "required_data_rate",
    "check_compliance",
]

_REL_TOL = 1e-9


@dataclass(frozen=True)
class NetworkScenario:
    """Uplink scenario: who transmits, how often, over what channel."""

    n_vehicles: int = 5
    shared_bandwidth_hz: float = 50e6
    tx_power_dbm: float = 23.0  # descriptive only; no propagation model
    spectral_efficiency_bps_per_hz: float = 2.0
    fps: float = 30.0
    sim_duration_s: float = 80.0
    scheduler: str = "round_robin"
    queue_capacity_frames: int | None = None  # waiting frames per vehicle

    def __post_init__(self) -> None:
        for name in (
            "n_vehicles",
            "shared_bandwidth_hz",
            "spectral_efficiency_bps_per_hz",
            "fps",
            "sim_duration_s",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.scheduler != "round_robin":
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        cap = self.queue_capacity_frames
        if cap is not None and cap < 0:
            raise ConfigError(f"queue_capacity_frames must be >= 0, got {cap}")

    @property
    def total_rate_bps(self) -> float:
        return self.spectral_efficiency_bps_per_hz * self.shared_bandwidth_hz

    @property
    def frames_per_vehicle(self) -> int:
        return round(self.fps * self.sim_duration_s)


@dataclass(frozen=True)
class DelayBreakdown:
    """Per-frame delay components; ``total_ms`` is their exact sum."""

    encode_ms: float
    queue_ms: float
    tx_ms: float
    decode_ms: float
    inference_ms: float
    total_ms: float

    def __post_init__(self) -> None:
        parts = (
            self.encode_ms,
            self.queue_ms,
            self.tx_ms,
            self.decode_ms,
            self.inference_ms,
        )
        if any(p < 0 for p in parts):
            raise ConfigError(f"delay components must be >= 0, got {parts}")
        if abs(self.total_ms - sum(parts)) > _REL_TOL * max(1.0, sum(parts)):
            raise ConfigError(
                f"total_ms {self.total_ms} != sum of components {sum(parts)}"
            )

    @property
    def total_excl_codec_ms(self) -> float:
        """Total without encode/decode: the network-plus-inference delay."""
        return self.queue_ms + self.tx_ms + self.inference_ms


@dataclass(frozen=True)
class FrameRecord:
    """One delivered frame: who sent it, how big, and its delays."""

    vehicle: int
    frame_index: int
    size_bytes: int
    breakdown: DelayBreakdown


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregate view of one simulation run (means and 95th percentiles)."""

    n_vehicles: int
    fps: float
    frames_generated: int
    frames_delivered: int
    frames_dropped: int
    drops: tuple[tuple[int, int], ...]  # (vehicle, frame_index)
    mean_frame_bytes: float
    required_rate_bps: float
    mean_encode_ms: float
    p95_encode_ms: float
    mean_queue_ms: float
    p95_queue_ms: float
    mean_tx_ms: float
    p95_tx_ms: float
    mean_decode_ms: float
    p95_decode_ms: float
    mean_inference_ms: float
    p95_inference_ms: float
    mean_total_ms: float
    p95_total_ms: float
    mean_total_excl_codec_ms: float
    p95_total_excl_codec_ms: float


@dataclass(frozen=True)
class RequirementProfile:
    """One service-requirement row: delay/rate/range/reliability targets.

    ``None`` marks a target the source table leaves unspecified.  The
    datarate is the uplink budget; a distinct downlink figure, where given,
    is carried in ``datarate_dl_mbps`` for reference only.
    """

    name: str
    category: str
    description: str
    entities: str
    max_delay_ms: float | None
    min_datarate_mbps: float | None
    datarate_dl_mbps: float | None = None
    min_range_m: float | None = None
    reliability_pct: float | None = None
    teleoperated: bool = False

    def __post_init__(self) -> None:
        for name in (
            "max_delay_ms",
            "min_datarate_mbps",
            "datarate_dl_mbps",
            "min_range_m",
            "reliability_pct",
        ):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive when present, got {value}")


@dataclass(frozen=True)
class ComplianceReport:
    """Pass/fail of one summary against one profile, with margins.

    Delay is judged under both definitions (with and without codec time);
    a criterion absent from the profile reports ``None``.  Reliability is
    never evaluated (the simulator has no loss model).
    """

    profile: RequirementProfile
    delay_ms_with_codec: float
    delay_ms_excl_codec: float
    delay_pass_with_codec: bool | None
    delay_pass_excl_codec: bool | None
    delay_margin_ms_with_codec: float | None
    delay_margin_ms_excl_codec: float | None
    required_rate_mbps: float
    datarate_pass: bool | None
    datarate_margin_mbps: float | None
    reliability_evaluated: bool = False

    @property
    def overall_pass(self) -> bool:
        checks = (
            self.delay_pass_with_codec,
            self.delay_pass_excl_codec,
            self.datarate_pass,
        )
        return all(c is not False for c in checks)


def _per_frame(values: float | Sequence[float], name: str) -> list[float]:
    """Normalize a scalar or sequence of per-frame millisecond times."""
    if isinstance(values, (int, float)):
        values = [float(values)]
    out = [float(v) for v in values]
    if not out:
        out = [0.0]
    if any(v < 0 for v in out):
        raise ConfigError(f"{name} entries must be >= 0")
    return out


@dataclass
class _VehicleState:
    waiting: list[tuple[float, int, int]] = field(default_factory=list)  # (arrival, k, bits)
    head_arrival: float = 0.0
    head_start: float = 0.0
    head_index: int = 0
    head_bits: float = 0.0
    remaining: float = 0.0
    active: bool = False


def simulate(
    scenario: NetworkScenario,
    size_traces: Sequence[Sequence[int]],
    encode_ms: float | Sequence[float] = 0.0,
    decode_ms: float | Sequence[float] = 0.0,
    inference_ms: float | Sequence[float] = 0.0,
) -> tuple[list[FrameRecord], SimulationSummary]:
    """Run the uplink simulation and summarize it.

    ``size_traces`` holds one frame-size sequence (bytes) per vehicle;
    traces shorter than the simulated frame count repeat cyclically, as do
    the per-frame encode/decode/inference time sequences.  Frame ``k`` of
    each vehicle is generated at ``k/fps`` and enters its queue once
    encoded.  Returns delivered-frame records (vehicle-major order) and
    the summary; queue overflows are dropped and recorded, never silent.
    """
    if len(size_traces) != scenario.n_vehicles:
        raise ConfigError(
            f"expected {scenario.n_vehicles} size traces, got {len(size_traces)}"
        )
    traces = []
    for v, trace in enumerate(size_traces):
        t = [int(s) for s in trace]
        if not t:
            raise ConfigError(f"size trace for vehicle {v} is empty")
        if any(s < 0 for s in t):
            raise ConfigError(f"size trace for vehicle {v} has negative sizes")
        traces.append(t)
    enc = _per_frame(encode_ms, "encode_ms")
    dec = _per_frame(decode_ms, "decode_ms")
    inf_t = _per_frame(inference_ms, "inference_ms")

    n_frames = scenario.frames_per_vehicle
    interval_ms = 1000.0 / scenario.fps
    rate_bits_per_ms = scenario.total_rate_bps / 1000.0
    capacity = scenario.queue_capacity_frames

    # Arrival events: (queue-arrival time, vehicle, frame index, bits).
    arrivals: list[tuple[float, int, int, int]] = []
    total_bytes = 0
    for v in range(scenario.n_vehicles):
        trace = traces[v]
        for k in range(n_frames):
            size = trace[k % len(trace)]
            total_bytes += size
            arrivals.append((k * interval_ms + enc[k % len(enc)], v, k, size * 8))
    arrivals.sort(key=lambda e: (e[0], e[1], e[2]))

    vehicles = [_VehicleState() for _ in range(scenario.n_vehicles)]
    active_count = 0
    completed: list[tuple[int, int, float, float, float]] = []  # v, k, arr, start, end
    drops: list[tuple[int, int]] = []

    def start_head(v: int, arrival: float, k: int, bits: float, now: float) -> None:
        nonlocal active_count
        st = vehicles[v]
        st.head_arrival = arrival
        st.head_start = now
        st.head_index = k
        st.head_bits = bits
        st.remaining = bits
        if not st.active:
            st.active = True
            active_count += 1

    i = 0
    now = 0.0
    while i < len(arrivals) or active_count:
        share = rate_bits_per_ms / active_count if active_count else 0.0
        if active_count:
            min_remaining = min(st.remaining for st in vehicles if st.active)
            t_complete = now + min_remaining / share if share > 0 else np.inf
        else:
            t_complete = np.inf
        t_arrival = arrivals[i][0] if i < len(arrivals) else np.inf
        t_next = min(t_complete, t_arrival)

        if active_count and t_next > now:
            drained = (t_next - now) * share
            for st in vehicles:
                if st.active:
                    st.remaining -= drained
        now = t_next

        # Completions first: anything drained to (numerically) zero.
        tol = _REL_TOL * rate_bits_per_ms * max(now, 1.0)
        for v, st in enumerate(vehicles):
            if st.active and st.remaining <= tol:
                completed.append((v, st.head_index, st.head_arrival, st.head_start, now))
                if st.waiting:
                    arr, k, bits = st.waiting.pop(0)
                    start_head(v, arr, k, bits, now)
                else:
                    st.active = False
                    active_count -= 1

        # Then all arrivals stamped exactly `now`.
        while i < len(arrivals) and arrivals[i][0] <= now:
            t_arr, v, k, bits = arrivals[i]
            i += 1
            st = vehicles[v]
            if st.active:
                if capacity is not None and len(st.waiting) >= capacity:
                    drops.append((v, k))
                else:
                    st.waiting.append((t_arr, k, bits))
            else:
                start_head(v, t_arr, k, bits, now)

    # Assemble per-frame records in (vehicle, frame) order.
    completed.sort(key=lambda c: (c[0], c[1]))
    records: list[FrameRecord] = []
    for v, k, arrival, start, end in completed:
        e = enc[k % len(enc)]
        d = dec[k % len(dec)]
        nf = inf_t[k % len(inf_t)]
        queue = start - arrival
        tx = end - start
        records.append(
            FrameRecord(
                vehicle=v,
                frame_index=k,
                size_bytes=traces[v][k % len(traces[v])],
                breakdown=DelayBreakdown(
                    encode_ms=e,
                    queue_ms=max(queue, 0.0),
                    tx_ms=tx,
                    decode_ms=d,
                    inference_ms=nf,
                    total_ms=e + max(queue, 0.0) + tx + d + nf,
                ),
            )
        )

    generated = scenario.n_vehicles * n_frames
    summary = _summarize(scenario, records, generated, drops, total_bytes)
    return records, summary


def _mean_p95(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(np.percentile(arr, 95.0))


def _summarize(
    scenario: NetworkScenario,
    records: list[FrameRecord],
    generated: int,
    drops: list[tuple[int, int]],
    total_bytes: int,
) -> SimulationSummary:
    mean_bytes = total_bytes / generated if generated else 0.0
    stats = {}
    for name in ("encode_ms", "queue_ms", "tx_ms", "decode_ms", "inference_ms", "total_ms"):
        stats[name] = _mean_p95([getattr(r.breakdown, name) for r in records])
    excl = _mean_p95([r.breakdown.total_excl_codec_ms for r in records])
    return SimulationSummary(
        n_vehicles=scenario.n_vehicles,
        fps=scenario.fps,
        frames_generated=generated,
        frames_delivered=len(records),
        frames_dropped=len(drops),
        drops=tuple(sorted(drops)),
        mean_frame_bytes=mean_bytes,
        required_rate_bps=mean_bytes * 8.0 * scenario.fps,
        mean_encode_ms=stats["encode_ms"][0],
        p95_encode_ms=stats["encode_ms"][1],
        mean_queue_ms=stats["queue_ms"][0],
        p95_queue_ms=stats["queue_ms"][1],
        mean_tx_ms=stats["tx_ms"][0],
        p95_tx_ms=stats["tx_ms"][1],
        mean_decode_ms=stats["decode_ms"][0],
        p95_decode_ms=stats["decode_ms"][1],
        mean_inference_ms=stats["inference_ms"][0],
        p95_inference_ms=stats["inference_ms"][1],
        mean_total_ms=stats["total_ms"][0],
        p95_total_ms=stats["total_ms"][1],
        mean_total_excl_codec_ms=excl[0],
        p95_total_excl_codec_ms=excl[1],
    )


def required_data_rate(frame_sizes: Sequence[int], fps: float) -> float:
    """Bits per second needed to ship ``frame_sizes`` (bytes) at ``fps``."""
    if len(frame_sizes) == 0:
        raise ConfigError("required_data_rate needs a non-empty size trace")
    if fps <= 0:
        raise ConfigError(f"fps must be positive, got {fps}")
    mean_bytes = sum(int(s) for s in frame_sizes) / len(frame_sizes)
    return mean_bytes * 8.0 * fps


def check_compliance(
    summary: SimulationSummary, profile: RequirementProfile
) -> ComplianceReport:
    """Judge a run against one requirement profile.

    Delay is the run's mean total, evaluated both with and without codec
    time; the datarate criterion asks whether the traffic's required rate
    fits the profile's uplink budget.  Margins are (limit − measured), so
    negative means failure.
    """
    with_codec = summary.mean_total_ms
    excl_codec = summary.mean_total_excl_codec_ms
    required_mbps = summary.required_rate_bps / 1e6

    limit = profile.max_delay_ms
    delay_pass_with = None if limit is None else with_codec <= limit
    delay_pass_excl = None if limit is None else excl_codec <= limit
    delay_margin_with = None if limit is None else limit - with_codec
    delay_margin_excl = None if limit is None else limit - excl_codec

    budget = profile.min_datarate_mbps
    rate_pass = None if budget is None else required_mbps <= budget
    rate_margin = None if budget is None else budget - required_mbps

    return ComplianceReport(
        profile=profile,
        delay_ms_with_codec=with_codec,
        delay_ms_excl_codec=excl_codec,
        delay_pass_with_codec=delay_pass_with,
        delay_pass_excl_codec=delay_pass_excl,
        delay_margin_ms_with_codec=delay_margin_with,
        delay_margin_ms_excl_codec=delay_margin_excl,
        required_rate_mbps=required_mbps,
        datarate_pass=rate_pass,
        datarate_margin_mbps=rate_margin,
    )
