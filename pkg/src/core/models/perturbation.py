"""
Perturbed-sample value types and their ground-truth labels
"""

from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .temporal import ActionSegment, TimeInterval

MANIFEST_SCHEMA_VERSION = "1.0"
RNG_ALGORITHM = "PCG64"
MASK_PLACEHOLDER = "<MASKED>"

_SEED_MAX = 2**64 - 1


class PerturbationKind(str, Enum):
    MASK = "mask"
    SWAP = "swap"
    SHIFT = "shift"
    KEEP = "keep"

    @property
    def min_segments(self) -> int:
        return 1 if self is PerturbationKind.KEEP else 2


def is_permutation(values: List[int], size: Optional[int] = None) -> bool:
    size = len(values) if size is None else size
    return len(values) == size and sorted(values) == list(range(size))


def invert_permutation(order: List[int]) -> List[int]:
    inverse = [0] * len(order)
    for position, source in enumerate(order):
        inverse[source] = position
    return inverse


class PerturbationSpec(BaseModel):
    """What to do to one record, and the seed that drives any random choice"""
    model_config = ConfigDict(frozen=True)

    kind: PerturbationKind
    seed: int = Field(default=0, ge=0, le=_SEED_MAX)
    swap_indices: Optional[Tuple[int, int]] = None

    @model_validator(mode="after")
    def _check_params(self) -> "PerturbationSpec":
        if self.swap_indices is not None:
            if self.kind is not PerturbationKind.SWAP:
                raise ValueError(f"swap_indices given for kind {self.kind.value}")
            i, j = self.swap_indices
            if i == j:
                raise ValueError(f"swap indices must be distinct, got ({i}, {j})")
            if i < 0 or j < 0:
                raise ValueError(f"swap indices must be non-negative, got ({i}, {j})")
        return self


class MaskGroundTruth(BaseModel):
    """The hidden segment of a masked clip"""
    model_config = ConfigDict(frozen=True)

    type: Literal["mask"] = "mask"
    masked_index: int = Field(ge=0)
    masked_interval: TimeInterval
    hidden_caption: str
    visible_captions: List[str]
    placeholder: str = MASK_PLACEHOLDER

    @model_validator(mode="after")
    def _placeholder_at_mask(self) -> "MaskGroundTruth":
        if self.masked_index >= len(self.visible_captions):
            raise ValueError("masked_index out of range of visible_captions")
        if self.visible_captions[self.masked_index] != self.placeholder:
            raise ValueError("visible_captions must carry the placeholder at masked_index")
        return self


class OrderGroundTruth(BaseModel):
    """Playback order of a swap/shift/keep sample.

    order[k] is the original segment shown at playback position k;
    correct_order[i] is the playback position holding original segment i, so
    [perturbed[c] for c in correct_order] restores the original sequence.
    misplaced_indices are playback positions k with order[k] != k.
    """
    model_config = ConfigDict(frozen=True)

    type: Literal["order"] = "order"
    is_correct: bool
    order: List[int]
    correct_order: List[int]
    misplaced_indices: List[int]
    perturbed_segments: List[ActionSegment]

    @model_validator(mode="after")
    def _consistent(self) -> "OrderGroundTruth":
        if not is_permutation(self.order):
            raise ValueError(f"order is not a permutation: {self.order}")
        if self.correct_order != invert_permutation(self.order):
            raise ValueError("correct_order must invert order")
        if self.misplaced_indices != [k for k, s in enumerate(self.order) if k != s]:
            raise ValueError("misplaced_indices disagree with order")
        if self.is_correct != (not self.misplaced_indices):
            raise ValueError("is_correct must hold exactly when nothing is misplaced")
        if len(self.perturbed_segments) != len(self.order):
            raise ValueError("perturbed_segments must list every segment")
        return self

    @property
    def perturbed_captions(self) -> List[str]:
        return [s.caption for s in self.perturbed_segments]


GroundTruthLabel = Annotated[Union[MaskGroundTruth, OrderGroundTruth], Field(discriminator="type")]


class PerturbedSample(BaseModel):
    """One synthesized clip: frame plan plus machine-readable ground truth.

    frame_plan[k] is the source frame shown at output position k, or None for a
    blank (all-zero) frame.
    """
    model_config = ConfigDict(frozen=True)

    sample_id: str = Field(min_length=1)
    source_video_id: str
    kind: PerturbationKind
    seed: int = Field(ge=0, le=_SEED_MAX)
    fps: float = Field(default=1.0, gt=0)
    frame_plan: List[Optional[int]]
    ground_truth: GroundTruthLabel

    @field_validator("frame_plan")
    @classmethod
    def _plan_in_range(cls, value: List[Optional[int]]) -> List[Optional[int]]:
        for position, source in enumerate(value):
            if source is not None and not 0 <= source < len(value):
                raise ValueError(f"frame_plan[{position}] = {source} outside [0, {len(value)})")
        return value

    @model_validator(mode="after")
    def _label_matches_kind(self) -> "PerturbedSample":
        expects_mask = self.kind is PerturbationKind.MASK
        if expects_mask != isinstance(self.ground_truth, MaskGroundTruth):
            raise ValueError(f"ground truth type does not fit kind {self.kind.value}")
        return self

    @property
    def frame_count(self) -> int:
        return len(self.frame_plan)

    @property
    def blank_positions(self) -> List[int]:
        return [k for k, source in enumerate(self.frame_plan) if source is None]


class ManifestHeader(BaseModel):
    """First line of every dataset manifest"""
    model_config = ConfigDict(frozen=True)

    type: Literal["header"] = "header"
    schema_version: str = MANIFEST_SCHEMA_VERSION
    rng: str = RNG_ALGORITHM
    root_seed: int = Field(ge=0, le=_SEED_MAX)
    fps: float = Field(gt=0)
    kinds: List[PerturbationKind] = Field(default_factory=list)
    counts: List[int] = Field(default_factory=list)
