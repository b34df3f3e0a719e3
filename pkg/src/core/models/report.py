"""
Metric value types and the aggregated report mirroring the reported tables
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

REPORT_SCHEMA_VERSION = "1.0"

_UNIT = dict(ge=0.0, le=1.0)


class ThresholdedPRF(BaseModel):
    """Micro-averaged precision / recall / F1 at one threshold"""
    model_config = ConfigDict(frozen=True)

    threshold: float = Field(gt=0.0, le=1.0)
    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)
    precision: float = Field(**_UNIT)
    recall: float = Field(**_UNIT)
    f1: float = Field(**_UNIT)

    @classmethod
    def from_counts(cls, threshold: float, tp: int, fp: int, fn: int) -> "ThresholdedPRF":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(
            threshold=threshold, tp=tp, fp=fp, fn=fn,
            precision=precision, recall=recall, f1=f1,
        )


class HitRatioResult(BaseModel):
    """Share of ground-truth starts hit within a tolerance window"""
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(gt=0.0)
    hits: int = Field(ge=0)
    total_gt: int = Field(ge=0)
    ratio: float = Field(**_UNIT)


class CaptionScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    rouge_l: float = Field(default=0.0, **_UNIT)
    token_f1: float = Field(default=0.0, **_UNIT)


class FailureEntry(BaseModel):
    """A prediction scored as a total miss or abstention"""
    model_config = ConfigDict(frozen=True)

    model: str
    task: str
    item_id: str
    reason: str


class ProcedureRow(BaseModel):
    """Procedure identification and coarse segmentation, one model"""

    model: str
    videos: int = Field(ge=0)
    top1_accuracy: float = Field(**_UNIT)
    prf: List[ThresholdedPRF]
    avg_coverage: float = Field(**_UNIT)
    hit_ratios: List[HitRatioResult]
    avg_hit: float = Field(**_UNIT)


class DenseCaptionRow(BaseModel):
    """Fine-grained segmentation and dense captioning, one model"""

    model: str
    videos: int = Field(ge=0)
    prf: List[ThresholdedPRF]
    caption_threshold: float = Field(gt=0.0, le=1.0)
    caption: CaptionScore
    matched_pairs: int = Field(ge=0)


class MissingEventRow(BaseModel):
    """Binary completeness classification plus localization of the hidden event"""

    model: str
    samples: int = Field(ge=0)
    detection: ThresholdedPRF
    hit_ratios: List[HitRatioResult]
    abstentions: int = Field(ge=0)


class OrderCorrectionRow(BaseModel):
    """Localization of misordered segments"""

    model: str
    samples: int = Field(ge=0)
    hit_ratios: List[HitRatioResult]
    verdict_accuracy: float = Field(**_UNIT)
    abstentions: int = Field(ge=0)


class MetricsReport(BaseModel):
    """Per-task blocks; each block holds one row per evaluated model"""

    schema_version: str = REPORT_SCHEMA_VERSION
    seed: Optional[int] = None
    iou_thresholds: List[float] = Field(default_factory=list)
    hit_tolerances: List[float] = Field(default_factory=list)
    missing_tolerances: List[float] = Field(default_factory=list)
    procedure: List[ProcedureRow] = Field(default_factory=list)
    dense_caption: List[DenseCaptionRow] = Field(default_factory=list)
    missing_event: List[MissingEventRow] = Field(default_factory=list)
    order_correction: List[OrderCorrectionRow] = Field(default_factory=list)
    failures: List[FailureEntry] = Field(default_factory=list)
