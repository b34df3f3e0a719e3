"""
Greedy one-to-one segment matching and localization metrics
"""

from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..models.report import HitRatioResult, ThresholdedPRF
from ..models.temporal import TimeInterval

DEFAULT_IOU_THRESHOLDS: Tuple[float, ...] = (0.3, 0.5, 0.7)
DEFAULT_HIT_TOLERANCES: Tuple[float, ...] = (0.5, 1.0, 2.0)


class MatchedPair(NamedTuple):
    pred_index: int
    gt_index: int
    iou: float


@dataclass(frozen=True)
class MatchResult:
    """One-to-one pairing; every pair's iou is at least the threshold used"""

    threshold: float
    pairs: Tuple[MatchedPair, ...]
    unmatched_pred: Tuple[int, ...]
    unmatched_gt: Tuple[int, ...]

    @property
    def tp(self) -> int:
        return len(self.pairs)


def iou_matrix(preds: Sequence[TimeInterval], gts: Sequence[TimeInterval]) -> np.ndarray:
    """Pairwise IoU, shape (len(preds), len(gts))"""
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)), dtype=np.float64)
    p = np.array([(i.start, i.end) for i in preds], dtype=np.float64)
    g = np.array([(i.start, i.end) for i in gts], dtype=np.float64)
    inter = np.clip(
        np.minimum(p[:, None, 1], g[None, :, 1]) - np.maximum(p[:, None, 0], g[None, :, 0]),
        0.0,
        None,
    )
    union = (p[:, 1] - p[:, 0])[:, None] + (g[:, 1] - g[:, 0])[None, :] - inter
    return inter / union


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")


def greedy_match(
    preds: Sequence[TimeInterval], gts: Sequence[TimeInterval], threshold: float
) -> MatchResult:
    """Accept candidate pairs in descending IoU order, ties by pred then gt index"""
    _check_threshold(threshold)
    ious = iou_matrix(preds, gts)
    pred_idx, gt_idx = np.nonzero(ious >= threshold)
    candidate_ious = ious[pred_idx, gt_idx]
    # lexsort: last key is primary
    order = np.lexsort((gt_idx, pred_idx, -candidate_ious))

    used_pred: set = set()
    used_gt: set = set()
    pairs: List[MatchedPair] = []
    for k in order:
        p, g = int(pred_idx[k]), int(gt_idx[k])
        if p in used_pred or g in used_gt:
            continue
        used_pred.add(p)
        used_gt.add(g)
        pairs.append(MatchedPair(p, g, float(candidate_ious[k])))

    return MatchResult(
        threshold=threshold,
        pairs=tuple(pairs),
        unmatched_pred=tuple(i for i in range(len(preds)) if i not in used_pred),
        unmatched_gt=tuple(i for i in range(len(gts)) if i not in used_gt),
    )


def prf_at_thresholds(
    dataset: Iterable[Tuple[Sequence[TimeInterval], Sequence[TimeInterval]]],
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
) -> List[ThresholdedPRF]:
    """Micro-averaged P/R/F1: counts summed over all videos before dividing"""
    if not thresholds:
        raise ValueError("at least one threshold is required")
    for threshold in thresholds:
        _check_threshold(threshold)

    items = list(dataset)
    results = []
    for threshold in thresholds:
        tp = fp = fn = 0
        for preds, gts in items:
            matched = greedy_match(preds, gts, threshold).tp
            tp += matched
            fp += len(preds) - matched
            fn += len(gts) - matched
        results.append(ThresholdedPRF.from_counts(threshold, tp, fp, fn))
    return results


def count_hits(pred_starts: Sequence[float], gt_starts: Sequence[float], tolerance: float) -> int:
    """Nearest-first one-to-one assignment of prediction starts to gt starts.

    Candidate pairs within the tolerance are taken by ascending distance, ties to
    the earlier gt, then the earlier prediction; each side is used at most once.
    """
    if not pred_starts or not gt_starts:
        return 0
    p = np.asarray(pred_starts, dtype=np.float64)
    g = np.asarray(gt_starts, dtype=np.float64)
    distance = np.abs(p[:, None] - g[None, :])
    pred_idx, gt_idx = np.nonzero(distance <= tolerance + 1e-9)
    order = np.lexsort((pred_idx, gt_idx, distance[pred_idx, gt_idx]))

    used_pred: set = set()
    used_gt: set = set()
    for k in order:
        pi, gi = int(pred_idx[k]), int(gt_idx[k])
        if pi in used_pred or gi in used_gt:
            continue
        used_pred.add(pi)
        used_gt.add(gi)
    return len(used_gt)


def hit_ratio(
    pred_starts: Sequence[float],
    gt_starts: Sequence[float],
    tolerances: Sequence[float] = DEFAULT_HIT_TOLERANCES,
) -> List[HitRatioResult]:
    if not gt_starts:
        raise ValueError("hit ratio is undefined without ground-truth starts")
    results = []
    for tolerance in tolerances:
        if tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {tolerance}")
        hits = count_hits(pred_starts, gt_starts, tolerance)
        results.append(
            HitRatioResult(
                tolerance=tolerance, hits=hits, total_gt=len(gt_starts),
                ratio=hits / len(gt_starts),
            )
        )
    return results


def aggregate_hit_ratios(
    per_item: Iterable[Sequence[HitRatioResult]], tolerances: Sequence[float]
) -> List[HitRatioResult]:
    """Global hit ratio: hits and totals summed over items, per tolerance"""
    hits = {t: 0 for t in tolerances}
    totals = {t: 0 for t in tolerances}
    for results in per_item:
        for result in results:
            hits[result.tolerance] += result.hits
            totals[result.tolerance] += result.total_gt
    return [
        HitRatioResult(
            tolerance=t, hits=hits[t], total_gt=totals[t],
            ratio=hits[t] / totals[t] if totals[t] else 0.0,
        )
        for t in tolerances
    ]


def normalize_label(label: str) -> str:
    return " ".join(label.lower().split())


def top1_accuracy(pred_labels: Sequence[Optional[str]], gt_labels: Sequence[str]) -> float:
    """Share of exact label matches after normalization; a None prediction is a miss"""
    if len(pred_labels) != len(gt_labels):
        raise ValueError(
            f"label lists differ in length: {len(pred_labels)} vs {len(gt_labels)}"
        )
    if not gt_labels:
        raise ValueError("accuracy is undefined on empty input")
    correct = sum(
        p is not None and normalize_label(p) == normalize_label(g) for p, g in zip(pred_labels, gt_labels)
    )
    return correct / len(gt_labels)


def classification_prf(tp: int, fp: int, fn: int) -> ThresholdedPRF:
    """P/R/F1 of a binary decision; threshold fixed at 1.0 since no IoU is involved"""
    return ThresholdedPRF.from_counts(1.0, tp, fp, fn)
