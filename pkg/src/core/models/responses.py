"""
Model responses, as dumped by the inference client and as parsed for scoring
"""

from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .perturbation import is_permutation
from .temporal import ActionSegment, TimeInterval

DUMP_SCHEMA_VERSION = "1.0"


class Task(str, Enum):
    PROCEDURE_ID = "procedure_id"
    DENSE_CAPTION = "dense_caption"
    MISSING_EVENT = "missing_event"
    ORDER_CORRECTION = "order_correction"

    @property
    def uses_samples(self) -> bool:
        """Task runs on perturbed samples rather than annotated videos"""
        return self in (Task.MISSING_EVENT, Task.ORDER_CORRECTION)


class RawModelResponse(BaseModel):
    """One line of the prediction dump; text is None when the request failed"""
    model_config = ConfigDict(frozen=True)

    schema_version: str = DUMP_SCHEMA_VERSION
    request_id: str
    task: Task
    video_id: str
    sample_id: Optional[str] = None
    model: str = ""
    status: Literal["ok", "failed"] = "ok"
    text: Optional[str] = None
    error: Optional[str] = None
    attempts: int = Field(default=1, ge=0)

    @property
    def item_id(self) -> str:
        return self.sample_id or self.video_id

    @property
    def ok(self) -> bool:
        return self.status == "ok" and self.text is not None


class SegmentParseResult(BaseModel):
    """Segments recovered from a response plus how many lines or items were rejected"""
    model_config = ConfigDict(frozen=True)

    segments: List[ActionSegment] = Field(default_factory=list)
    malformed: int = Field(default=0, ge=0)
    strategy: Literal["structured", "lines", "none"] = "none"

    @property
    def failed(self) -> bool:
        return not self.segments


class OrderVerdict(BaseModel):
    """Order-correction answer; is_correct None marks an abstention"""
    model_config = ConfigDict(frozen=True)

    is_correct: Optional[bool] = None
    misplaced: List[int] = Field(default_factory=list)
    corrected_order: Optional[List[int]] = None
    reasoning: str = ""

    @model_validator(mode="after")
    def _valid_order(self) -> "OrderVerdict":
        if self.corrected_order is not None and not is_permutation(self.corrected_order):
            raise ValueError(f"corrected_order is not a permutation: {self.corrected_order}")
        return self

    @property
    def abstained(self) -> bool:
        return self.is_correct is None

    @classmethod
    def abstention(cls, reasoning: str = "") -> "OrderVerdict":
        return cls(reasoning=reasoning)


class MissingVerdict(BaseModel):
    """Missing-event answer; has_missing None marks an abstention"""
    model_config = ConfigDict(frozen=True)

    has_missing: Optional[bool] = None
    predicted_interval: Optional[TimeInterval] = None
    predicted_caption: Optional[str] = None
    reasoning: str = ""

    @model_validator(mode="after")
    def _caption_when_missing(self) -> "MissingVerdict":
        if self.has_missing and not (self.predicted_caption or "").strip():
            raise ValueError("a missing-event verdict must name the missing caption")
        return self

    @property
    def abstained(self) -> bool:
        return self.has_missing is None

    @classmethod
    def abstention(cls, reasoning: str = "") -> "MissingVerdict":
        return cls(reasoning=reasoning)
