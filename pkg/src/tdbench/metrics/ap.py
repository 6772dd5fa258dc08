"""Average precision over ranked 3D detections.

The evaluation follows the KITTI-style protocol: detections are ranked by
score, greedily matched against ground truth at a class-specific IoU
threshold, and the precision-recall sweep is summarized by 40-point
interpolated average precision

    AP = (1/40) * sum over r in R of  P_interp(r),
    P_interp(r) = max { P(r~) : r~ >= r }  (0 if no sweep point reaches r),

with R the forty equally spaced recall thresholds {1/40, 2/40, ..., 1}.

Ground-truth boxes can be marked *ignored* (e.g. barely-visible objects):
they are excluded from recall's denominator, and a detection whose best
overlap is with an ignored box is dropped from the sweep instead of being
counted as a false positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .. import kernels
from ..detect import Detection
from ..errors import ConfigError
from ..geometry import Box3D, ClassLabel, LabeledFrame

__all__ = [
    "ApConfig",
    "PrCurve",
    "ApResult",
    "match_detections",
    "average_precision",
    "evaluate_corpus",
    "frame_mean_ap",
]

_DEFAULT_RECALLS = tuple((i + 1) / 40 for i in range(40))
_DEFAULT_IOU = {ClassLabel.CAR: 0.70, ClassLabel.PEDESTRIAN: 0.50}


@dataclass(frozen=True)
class ApConfig:
    """Recall grid and per-class IoU matching thresholds."""

    recall_thresholds: tuple[float, ...] = _DEFAULT_RECALLS
    iou_thresholds: Mapping[ClassLabel, float] = field(
        default_factory=lambda: dict(_DEFAULT_IOU)
    )

    def __post_init__(self) -> None:
        rt = self.recall_thresholds
        if len(rt) != 40:
            raise ConfigError(f"expected 40 recall thresholds, got {len(rt)}")
        if any(b <= a for a, b in zip(rt, rt[1:])):
            raise ConfigError("recall thresholds must be strictly increasing")
        if not 0.0 < rt[0] or rt[-1] != 1.0:
            raise ConfigError("recall thresholds must lie in (0, 1] and end at 1")
        for label, thr in self.iou_thresholds.items():
            if not 0.0 < thr <= 1.0:
                raise ConfigError(f"IoU threshold for {label} must be in (0, 1]")

    def iou_threshold(self, label: ClassLabel) -> float:
        try:
            return self.iou_thresholds[ClassLabel(label)]
        except KeyError:
            raise ConfigError(f"no IoU threshold configured for class {label}")


@dataclass(frozen=True)
class PrCurve:
    """The precision-recall sweep of a ranked detection list.

    ``points`` holds (recall, precision) after each counted detection, in
    rank order; ignored detections do not appear.  ``n_gt`` is the recall
    denominator.
    """

    points: tuple[tuple[float, float], ...]
    n_gt: int
    n_tp: int
    n_fp: int

    def __post_init__(self) -> None:
        recalls = [r for r, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ConfigError("recall must be non-decreasing along the sweep")
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise ConfigError("precision must lie in [0, 1]")


@dataclass(frozen=True)
class ApResult:
    """Interpolated AP plus the sweep's final match counts."""

    ap: float
    interpolated: tuple[float, ...]
    n_gt: int
    tp: int
    fp: int

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


def _greedy_outcomes(
    det_boxes: Sequence[Box3D],
    scores: Sequence[float],
    gt_boxes: Sequence[Box3D],
    ignore_boxes: Sequence[Box3D],
    iou_threshold: float,
) -> list[bool | None]:
    """Label each detection True (TP), False (FP) or None (ignored).

    Detections are processed by descending score (stable in input order);
    each one greedily claims the still-unmatched ground-truth box of
    highest IoU if that IoU clears the threshold.
    """
    n_det = len(det_boxes)
    outcomes: list[bool | None] = [False] * n_det
    if n_det == 0:
        return outcomes

    order = sorted(range(n_det), key=lambda i: (-scores[i], i))
    det_vecs = np.stack([b.as_vector() for b in det_boxes])
    iou_gt = (
        kernels.iou3d_matrix(det_vecs, np.stack([b.as_vector() for b in gt_boxes]))
        if gt_boxes
        else np.zeros((n_det, 0))
    )
    iou_ign = (
        kernels.iou3d_matrix(
            det_vecs, np.stack([b.as_vector() for b in ignore_boxes])
        )
        if ignore_boxes
        else np.zeros((n_det, 0))
    )

    gt_taken = [False] * len(gt_boxes)
    for i in order:
        best_j = -1
        best_iou = 0.0
        for j in range(len(gt_boxes)):
            if gt_taken[j]:
                continue
            if iou_gt[i, j] > best_iou:
                best_iou = float(iou_gt[i, j])
                best_j = j
        if best_j >= 0 and best_iou >= iou_threshold:
            gt_taken[best_j] = True
            outcomes[i] = True
        elif len(ignore_boxes) and float(iou_ign[i].max()) >= iou_threshold:
            outcomes[i] = None
        else:
            outcomes[i] = False
    return outcomes


def _sweep(ranked_outcomes: Iterable[bool], n_gt: int) -> PrCurve:
    """Build the cumulative precision-recall sweep from ranked TP flags."""
    points: list[tuple[float, float]] = []
    tp = fp = 0
    for is_tp in ranked_outcomes:
        if is_tp:
            tp += 1
        else:
            fp += 1
        recall = tp / n_gt if n_gt > 0 else 0.0
        points.append((recall, tp / (tp + fp)))
    return PrCurve(points=tuple(points), n_gt=n_gt, n_tp=tp, n_fp=fp)


def match_detections(
    detections: Sequence[Detection],
    gt_boxes: Sequence[Box3D],
    config: ApConfig = ApConfig(),
    label: ClassLabel | None = None,
    ignore_boxes: Sequence[Box3D] = (),
) -> PrCurve:
    """Match one frame's single-class detections against its ground truth.

    ``detections`` and ``gt_boxes`` must already be filtered to one class
    (``label``, defaulting to the class of the detections themselves);
    ``ignore_boxes`` are same-class boxes excluded from scoring: they do not
    count toward recall, and a detection landing on one is dropped from the
    sweep rather than counted as a false positive.
    """
    if label is None:
        if not detections:
            return _sweep([], len(gt_boxes))
        label = detections[0].label
    if any(d.label != label for d in detections):
        raise ConfigError("match_detections expects single-class detections")
    threshold = config.iou_threshold(label)
    scores = [d.score for d in detections]
    outcomes = _greedy_outcomes(
        [d.box for d in detections], scores, list(gt_boxes), list(ignore_boxes),
        threshold,
    )
    order = sorted(range(len(detections)), key=lambda i: (-scores[i], i))
    ranked = [outcomes[i] for i in order if outcomes[i] is not None]
    return _sweep(ranked, len(gt_boxes))


def average_precision(curve: PrCurve, config: ApConfig = ApConfig()) -> ApResult:
    """40-point interpolated AP of a precision-recall sweep."""
    recalls = np.array([r for r, _ in curve.points], dtype=np.float64)
    precisions = np.array([p for _, p in curve.points], dtype=np.float64)
    if len(precisions):
        suffix_max = np.maximum.accumulate(precisions[::-1])[::-1]
    else:
        suffix_max = precisions

    interpolated = []
    for r in config.recall_thresholds:
        idx = int(np.searchsorted(recalls, r, side="left"))
        interpolated.append(float(suffix_max[idx]) if idx < len(recalls) else 0.0)

    ap = sum(interpolated) / len(config.recall_thresholds)
    return ApResult(
        ap=ap,
        interpolated=tuple(interpolated),
        n_gt=curve.n_gt,
        tp=curve.n_tp,
        fp=curve.n_fp,
    )


def evaluate_corpus(
    detections_by_frame: Mapping[int, Sequence[Detection]],
    frames: Mapping[int, LabeledFrame],
    config: ApConfig = ApConfig(),
) -> dict[ClassLabel, ApResult]:
    """Pooled per-class AP over a corpus.

    Detections from all frames are ranked together (score descending,
    ties broken by frame id then per-frame rank); matching itself stays
    frame-local.  Ground-truth boxes flagged occluded are ignored: they do
    not count toward recall and detections overlapping them are dropped.
    """
    results: dict[ClassLabel, ApResult] = {}
    frame_ids = sorted(frames)
    for label in ClassLabel:
        threshold = config.iou_threshold(label)
        pooled: list[tuple[float, int, int, bool]] = []
        n_gt_total = 0
        for order_idx, frame_id in enumerate(frame_ids):
            frame = frames[frame_id]
            dets = [
                d for d in detections_by_frame.get(frame_id, ()) if d.label == label
            ]
            gts = [
                box
                for box, lab, occ in zip(frame.boxes, frame.labels, frame.occluded)
                if lab == label and not occ
            ]
            ignored = [
                box
                for box, lab, occ in zip(frame.boxes, frame.labels, frame.occluded)
                if lab == label and occ
            ]
            n_gt_total += len(gts)
            outcomes = _greedy_outcomes(
                [d.box for d in dets],
                [d.score for d in dets],
                gts,
                ignored,
                threshold,
            )
            for rank, (det, outcome) in enumerate(zip(dets, outcomes)):
                if outcome is not None:
                    pooled.append((det.score, order_idx, rank, outcome))

        pooled.sort(key=lambda item: (-item[0], item[1], item[2]))
        curve = _sweep([item[3] for item in pooled], n_gt_total)
        results[label] = average_precision(curve, config)
    return results


def frame_mean_ap(
    detections_by_frame: Mapping[int, Sequence[Detection]],
    frames: Mapping[int, LabeledFrame],
    config: ApConfig = ApConfig(),
) -> dict[ClassLabel, float]:
    """Per-class mean of per-frame APs.

    Each frame is scored independently (same matching and occlusion rules as
    :func:`evaluate_corpus`) and the APs are averaged.  Frames with no
    visible ground truth of a class do not contribute to that class's mean
    (their AP is undefined rather than zero); a class visible in no frame at
    all reports 0.0.
    """
    sums: dict[ClassLabel, float] = {label: 0.0 for label in ClassLabel}
    counts: dict[ClassLabel, int] = {label: 0 for label in ClassLabel}
    for frame_id in sorted(frames):
        frame = frames[frame_id]
        for label in ClassLabel:
            gts = [
                box
                for box, lab, occ in zip(frame.boxes, frame.labels, frame.occluded)
                if lab == label and not occ
            ]
            if not gts:
                continue
            ignored = [
                box
                for box, lab, occ in zip(frame.boxes, frame.labels, frame.occluded)
                if lab == label and occ
            ]
            dets = [
                d for d in detections_by_frame.get(frame_id, ()) if d.label == label
            ]
            curve = match_detections(
                dets, gts, config, label=label, ignore_boxes=ignored
            )
            sums[label] += average_precision(curve, config).ap
            counts[label] += 1
    return {
        label: (sums[label] / counts[label] if counts[label] else 0.0)
        for label in ClassLabel
    }
