"""
Evaluation drivers: parsed responses against ground truth, one report row per model

A missing or failed response, or one that cannot be parsed, scores as a total
miss (fp = 0, fn = |gt|) and is listed in the failures appendix.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import structlog

from ..metrics.matching import (
    DEFAULT_HIT_TOLERANCES,
    DEFAULT_IOU_THRESHOLDS,
    aggregate_hit_ratios,
    classification_prf,
    greedy_match,
    hit_ratio,
    top1_accuracy,
    prf_at_thresholds,
)
from ..metrics.text import mean_caption_score, score_matched_captions, score_matched_pairs
from ..models.perturbation import MaskGroundTruth, OrderGroundTruth, PerturbationKind, PerturbedSample
from ..models.report import (
    CaptionScore,
    DenseCaptionRow,
    FailureEntry,
    HitRatioResult,
    MissingEventRow,
    OrderCorrectionRow,
    ProcedureRow,
)
from ..models.responses import RawModelResponse, Task
from ..models.temporal import AnnotationRecord, ActionSegment, TimeInterval, coverage_fraction
from .parser import parse_missing_verdict, parse_order_verdict, parse_procedure_label, parse_segment_list

logger = structlog.get_logger(__name__)

DEFAULT_MISSING_TOLERANCES: Tuple[float, ...] = (0.5, 1.0)
DEFAULT_CAPTION_THRESHOLD = 0.3


@dataclass
class TaskOutcome:
    """A report row plus the items that could not be scored normally"""

    row: object
    failures: List[FailureEntry] = field(default_factory=list)

    @property
    def parse_failures(self) -> int:
        return len(self.failures)


def index_responses(responses: Sequence[RawModelResponse], task: Task) -> Dict[str, RawModelResponse]:
    """Latest response per item id for one task"""
    indexed: Dict[str, RawModelResponse] = {}
    for response in responses:
        if response.task is task:
            indexed[response.item_id] = response
    return indexed


def _failure(model: str, task: Task, item_id: str, reason: str) -> FailureEntry:
    logger.info("item_scored_as_failure", model=model, task=task.value, item_id=item_id, reason=reason)
    return FailureEntry(model=model, task=task.value, item_id=item_id, reason=reason)


def _segments_for(
    model: str, task: Task, item_id: str, response: Optional[RawModelResponse], failures: List[FailureEntry]
) -> List[ActionSegment]:
    if response is None:
        failures.append(_failure(model, task, item_id, "no response"))
        return []
    if not response.ok:
        failures.append(_failure(model, task, item_id, f"request failed: {response.error or 'unknown'}"))
        return []
    parsed = parse_segment_list(response)
    if parsed.failed:
        failures.append(_failure(model, task, item_id, f"no parseable segments ({parsed.malformed} malformed)"))
    return parsed.segments


def _starts(intervals: Sequence[TimeInterval]) -> List[float]:
    return [i.start for i in intervals]


def evaluate_procedure(
    model: str,
    records: Sequence[AnnotationRecord],
    responses: Sequence[RawModelResponse],
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
    tolerances: Sequence[float] = DEFAULT_HIT_TOLERANCES,
) -> TaskOutcome:
    """Top-1 procedure accuracy plus coarse segmentation F1, coverage and hit ratio"""
    by_video = index_responses(responses, Task.PROCEDURE_ID)
    failures: List[FailureEntry] = []
    pred_labels: List[Optional[str]] = []
    dataset = []
    coverages = []
    per_video_hits: List[List[HitRatioResult]] = []

    for record in records:
        response = by_video.get(record.video_id)
        segments = _segments_for(model, Task.PROCEDURE_ID, record.video_id, response, failures)
        label = parse_procedure_label(response) if response is not None and response.ok else None
        pred_labels.append(label)

        predicted = [s.interval for s in segments]
        dataset.append((predicted, record.intervals))
        coverages.append(coverage_fraction(record.intervals, predicted))
        if record.segments:
            per_video_hits.append(hit_ratio(_starts(predicted), _starts(record.intervals), tolerances))

    hits = aggregate_hit_ratios(per_video_hits, tolerances)
    count = len(records)
    row = ProcedureRow(
        model=model,
        videos=count,
        top1_accuracy=top1_accuracy(pred_labels, [r.procedure_label for r in records]) if count else 0.0,
        prf=prf_at_thresholds(dataset, thresholds),
        avg_coverage=sum(coverages) / count if count else 0.0,
        hit_ratios=hits,
        avg_hit=sum(h.ratio for h in hits) / len(hits) if hits else 0.0,
    )
    return TaskOutcome(row=row, failures=failures)


def evaluate_dense_captions(
    model: str,
    records: Sequence[AnnotationRecord],
    responses: Sequence[RawModelResponse],
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
    caption_threshold: float = DEFAULT_CAPTION_THRESHOLD,
) -> TaskOutcome:
    """P/R/F1 per IoU threshold; caption scores averaged over pairs matched at caption_threshold"""
    by_video = index_responses(responses, Task.DENSE_CAPTION)
    failures: List[FailureEntry] = []
    dataset = []
    pair_scores: List[CaptionScore] = []

    for record in records:
        segments = _segments_for(model, Task.DENSE_CAPTION, record.video_id, by_video.get(record.video_id), failures)
        predicted = [s.interval for s in segments]
        dataset.append((predicted, record.intervals))
        matches = greedy_match(predicted, record.intervals, caption_threshold)
        pair_scores.extend(score_matched_pairs(matches, segments, record.segments))
        video_score = score_matched_captions(matches, segments, record.segments)
        logger.debug(
            "video_captions_scored", model=model, video_id=record.video_id,
            matched=len(matches.pairs), rouge_l=video_score.rouge_l, token_f1=video_score.token_f1,
        )

    row = DenseCaptionRow(
        model=model,
        videos=len(records),
        prf=prf_at_thresholds(dataset, thresholds),
        caption_threshold=caption_threshold,
        caption=mean_caption_score(pair_scores),
        matched_pairs=len(pair_scores),
    )
    return TaskOutcome(row=row, failures=failures)


def evaluate_missing_events(
    model: str,
    samples: Sequence[PerturbedSample],
    responses: Sequence[RawModelResponse],
    tolerances: Sequence[float] = DEFAULT_MISSING_TOLERANCES,
) -> TaskOutcome:
    """Binary completeness detection (mask samples positive, keep samples negative)
    and start-time hits on the hidden segment. Abstentions predict "complete".
    """
    by_sample = index_responses(responses, Task.MISSING_EVENT)
    failures: List[FailureEntry] = []
    tp = fp = fn = abstentions = 0
    per_sample_hits: List[List[HitRatioResult]] = []
    evaluated = 0

    for sample in samples:
        truth = sample.ground_truth
        positive = isinstance(truth, MaskGroundTruth)
        if not positive and sample.kind is not PerturbationKind.KEEP:
            continue
        evaluated += 1

        response = by_sample.get(sample.sample_id)
        predicted_missing = False
        predicted_start: Optional[float] = None
        if response is None or not response.ok:
            reason = "no response" if response is None else f"request failed: {response.error or 'unknown'}"
            failures.append(_failure(model, Task.MISSING_EVENT, sample.sample_id, reason))
            abstentions += 1
        else:
            verdict = parse_missing_verdict(response)
            if verdict.abstained:
                abstentions += 1
                failures.append(_failure(model, Task.MISSING_EVENT, sample.sample_id, "abstention"))
            elif verdict.has_missing:
                predicted_missing = True
                if verdict.predicted_interval is not None:
                    predicted_start = verdict.predicted_interval.start

        if positive and predicted_missing:
            tp += 1
        elif positive:
            fn += 1
        elif predicted_missing:
            fp += 1

        if positive:
            starts = [predicted_start] if predicted_start is not None else []
            per_sample_hits.append(hit_ratio(starts, [truth.masked_interval.start], tolerances))

    row = MissingEventRow(
        model=model,
        samples=evaluated,
        detection=classification_prf(tp, fp, fn),
        hit_ratios=aggregate_hit_ratios(per_sample_hits, tolerances),
        abstentions=abstentions,
    )
    return TaskOutcome(row=row, failures=failures)


def evaluate_order_corrections(
    model: str,
    samples: Sequence[PerturbedSample],
    responses: Sequence[RawModelResponse],
    tolerances: Sequence[float] = DEFAULT_HIT_TOLERANCES,
    exclude_abstentions: bool = False,
) -> TaskOutcome:
    """Start-time hits of the segments named as misplaced, on the perturbed timeline.

    Ground-truth starts are those of the truly misplaced playback positions.
    Abstentions score as misses unless exclude_abstentions drops them entirely.
    """
    by_sample = index_responses(responses, Task.ORDER_CORRECTION)
    failures: List[FailureEntry] = []
    per_sample_hits: List[List[HitRatioResult]] = []
    abstentions = correct_verdicts = evaluated = 0

    for sample in samples:
        truth = sample.ground_truth
        if not isinstance(truth, OrderGroundTruth):
            continue
        segments = truth.perturbed_segments

        response = by_sample.get(sample.sample_id)
        verdict = None
        if response is None or not response.ok:
            reason = "no response" if response is None else f"request failed: {response.error or 'unknown'}"
            failures.append(_failure(model, Task.ORDER_CORRECTION, sample.sample_id, reason))
        else:
            verdict = parse_order_verdict(response, segment_count=len(segments))
            if verdict.abstained:
                failures.append(_failure(model, Task.ORDER_CORRECTION, sample.sample_id, "abstention"))

        abstained = verdict is None or verdict.abstained
        if abstained:
            abstentions += 1
            if exclude_abstentions:
                continue
        evaluated += 1
        if not abstained and verdict.is_correct == truth.is_correct:
            correct_verdicts += 1

        gt_starts = [segments[k].start for k in truth.misplaced_indices]
        if gt_starts:
            pred_starts = [] if abstained else [segments[k].start for k in verdict.misplaced]
            per_sample_hits.append(hit_ratio(pred_starts, gt_starts, tolerances))

    row = OrderCorrectionRow(
        model=model,
        samples=evaluated,
        hit_ratios=aggregate_hit_ratios(per_sample_hits, tolerances),
        verdict_accuracy=correct_verdicts / evaluated if evaluated else 0.0,
        abstentions=abstentions,
    )
    return TaskOutcome(row=row, failures=failures)
