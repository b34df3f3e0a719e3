"""
Perturbed dataset synthesis: masked events, swapped / shifted / kept segment order

Every random choice comes from a PCG64 generator seeded by derive_seed(root_seed, ...),
so a (record, kind, seed) triple always yields the same sample.
"""

import hashlib
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from PIL import Image
from pydantic import ValidationError

from ..errors import FrameDirectoryError, ManifestError, PerturbationError
from ..models.perturbation import (
    MANIFEST_SCHEMA_VERSION,
    MASK_PLACEHOLDER,
    RNG_ALGORITHM,
    ManifestHeader,
    MaskGroundTruth,
    OrderGroundTruth,
    PerturbationKind,
    PerturbationSpec,
    PerturbedSample,
    invert_permutation,
    is_permutation,
)
from ..models.temporal import (
    ActionSegment,
    AnnotationRecord,
    FrameIndexRange,
    seconds_to_frames,
)
from .media import (
    Frame,
    OverlayStyle,
    encode_png,
    frame_path,
    list_frame_files,
    load_image,
    render_timestamp,
)

logger = structlog.get_logger(__name__)

SeedKey = Union[int, str]


def _key_entropy(key: SeedKey) -> int:
    if isinstance(key, int):
        return key
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(root_seed: int, *keys: SeedKey) -> int:
    """64-bit child seed of root_seed for the given keys (video id, kind, ...)"""
    sequence = np.random.SeedSequence([root_seed, *(_key_entropy(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class FrameLayout:
    """Partition of a frame grid into segment blocks and the gap frames between them.

    blocks[i] holds the frames of segment i. Overlapping neighbours are clipped so
    blocks stay disjoint; a segment whose block ends up empty is rejected.
    """

    frame_count: int
    blocks: Tuple[FrameIndexRange, ...]

    @classmethod
    def from_record(
        cls, record: AnnotationRecord, fps: float = 1.0, frame_count: Optional[int] = None
    ) -> "FrameLayout":
        total = record.frame_count(fps) if frame_count is None else frame_count
        blocks: List[FrameIndexRange] = []
        previous_end = 0
        for index, segment in enumerate(record.segments):
            span = seconds_to_frames(segment.interval, fps)
            first = max(span.first, previous_end)
            last = min(span.last_exclusive, total)
            if last <= first:
                raise PerturbationError(
                    f"segment {index} of {record.video_id} has no frames of its own at {fps} fps"
                )
            blocks.append(FrameIndexRange(first=first, last_exclusive=last))
            previous_end = last
        return cls(frame_count=total, blocks=tuple(blocks))

    def identity_plan(self) -> List[Optional[int]]:
        return list(range(self.frame_count))

    def reorder(self, order: Sequence[int]) -> Tuple[List[Optional[int]], "FrameLayout"]:
        """Play block order[k] in slot k; gap frames keep their place between slots.

        Blocks of unequal length move the boundaries of everything after them.
        Returns the frame plan and the layout of the reordered timeline, whose
        blocks are indexed by playback position.
        """
        if not is_permutation(list(order), len(self.blocks)):
            raise PerturbationError(f"order {list(order)} is not a permutation of {len(self.blocks)} blocks")

        plan: List[Optional[int]] = []
        new_blocks: List[FrameIndexRange] = []
        previous_end = 0
        for slot, block in enumerate(self.blocks):
            plan.extend(range(previous_end, block.first))
            source = self.blocks[order[slot]]
            start = len(plan)
            plan.extend(source.as_range())
            new_blocks.append(FrameIndexRange(first=start, last_exclusive=len(plan)))
            previous_end = block.last_exclusive
        plan.extend(range(previous_end, self.frame_count))
        return plan, FrameLayout(frame_count=self.frame_count, blocks=tuple(new_blocks))


def compose_plans(first: Sequence[Optional[int]], second: Sequence[Optional[int]]) -> List[Optional[int]]:
    """Plan equivalent to applying first, then second to its output"""
    return [None if k is None else first[k] for k in second]


def _require_segments(record: AnnotationRecord, kind: PerturbationKind) -> None:
    if len(record.segments) < kind.min_segments:
        raise PerturbationError(
            f"{kind.value} needs at least {kind.min_segments} segments, "
            f"{record.video_id} has {len(record.segments)}"
        )


def _sample_id(record: AnnotationRecord, kind: PerturbationKind) -> str:
    return f"{record.video_id}__{kind.value}"


def _reordered_sample(
    record: AnnotationRecord,
    kind: PerturbationKind,
    order: List[int],
    seed: int,
    fps: float,
    frame_count: Optional[int],
) -> PerturbedSample:
    layout = FrameLayout.from_record(record, fps, frame_count)
    plan, reordered = layout.reorder(order)

    perturbed_segments = []
    for slot, source in enumerate(order):
        segment = record.segments[source]
        offset = (reordered.blocks[slot].first - layout.blocks[source].first) / fps
        start = max(0.0, segment.start + offset)
        perturbed_segments.append(ActionSegment.of(start, segment.end + offset, segment.caption))

    ground_truth = OrderGroundTruth(
        is_correct=order == list(range(len(order))),
        order=order,
        correct_order=invert_permutation(order),
        misplaced_indices=[k for k, s in enumerate(order) if k != s],
        perturbed_segments=perturbed_segments,
    )
    return PerturbedSample(
        sample_id=_sample_id(record, kind),
        source_video_id=record.video_id,
        kind=kind,
        seed=seed,
        fps=fps,
        frame_plan=plan,
        ground_truth=ground_truth,
    )


def gen_mask(
    record: AnnotationRecord, seed: int, fps: float = 1.0, frame_count: Optional[int] = None,
    placeholder: str = MASK_PLACEHOLDER,
) -> PerturbedSample:
    """Blank the frames of one uniformly chosen segment"""
    _require_segments(record, PerturbationKind.MASK)
    total = record.frame_count(fps) if frame_count is None else frame_count
    masked_index = int(make_rng(seed).integers(len(record.segments)))
    masked = record.segments[masked_index]

    blanked = set(seconds_to_frames(masked.interval, fps).as_range())
    plan: List[Optional[int]] = [None if i in blanked else i for i in range(total)]

    visible = record.captions
    visible[masked_index] = placeholder
    ground_truth = MaskGroundTruth(
        masked_index=masked_index,
        masked_interval=masked.interval,
        hidden_caption=masked.caption,
        visible_captions=visible,
        placeholder=placeholder,
    )
    return PerturbedSample(
        sample_id=_sample_id(record, PerturbationKind.MASK),
        source_video_id=record.video_id,
        kind=PerturbationKind.MASK,
        seed=seed,
        fps=fps,
        frame_plan=plan,
        ground_truth=ground_truth,
    )


def gen_swap(
    record: AnnotationRecord, seed: int, indices: Optional[Tuple[int, int]] = None,
    fps: float = 1.0, frame_count: Optional[int] = None,
) -> PerturbedSample:
    """Exchange the playback positions of two segments"""
    _require_segments(record, PerturbationKind.SWAP)
    n = len(record.segments)
    if indices is None:
        i, j = sorted(int(x) for x in make_rng(seed).choice(n, size=2, replace=False))
    else:
        i, j = indices
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise PerturbationError(f"invalid swap indices ({i}, {j}) for {n} segments")
    order = list(range(n))
    order[i], order[j] = order[j], order[i]
    return _reordered_sample(record, PerturbationKind.SWAP, order, seed, fps, frame_count)


def gen_shift(
    record: AnnotationRecord, seed: int = 0, fps: float = 1.0, frame_count: Optional[int] = None
) -> PerturbedSample:
    """Move the first segment to the end: [s1, s2, ..., sn] plays as [s2, ..., sn, s1]"""
    _require_segments(record, PerturbationKind.SHIFT)
    n = len(record.segments)
    order = list(range(1, n)) + [0]
    return _reordered_sample(record, PerturbationKind.SHIFT, order, seed, fps, frame_count)


def gen_keep(
    record: AnnotationRecord, seed: int = 0, fps: float = 1.0, frame_count: Optional[int] = None
) -> PerturbedSample:
    _require_segments(record, PerturbationKind.KEEP)
    order = list(range(len(record.segments)))
    return _reordered_sample(record, PerturbationKind.KEEP, order, seed, fps, frame_count)


def generate(
    record: AnnotationRecord, spec: PerturbationSpec, fps: float = 1.0,
    frame_count: Optional[int] = None, placeholder: str = MASK_PLACEHOLDER,
) -> PerturbedSample:
    if spec.kind is PerturbationKind.MASK:
        return gen_mask(record, spec.seed, fps, frame_count, placeholder)
    if spec.kind is PerturbationKind.SWAP:
        return gen_swap(record, spec.seed, spec.swap_indices, fps, frame_count)
    if spec.kind is PerturbationKind.SHIFT:
        return gen_shift(record, spec.seed, fps, frame_count)
    return gen_keep(record, spec.seed, fps, frame_count)


def synthesize_dataset(
    records: Sequence[AnnotationRecord],
    counts: Dict[PerturbationKind, int],
    root_seed: int,
    fps: float = 1.0,
    placeholder: str = MASK_PLACEHOLDER,
) -> List[PerturbedSample]:
    """Draw counts[kind] distinct eligible videos per kind and perturb each.

    Kinds are processed in the order given; within a kind, samples follow the
    annotation order of their source videos.
    """
    samples: List[PerturbedSample] = []
    for kind, count in counts.items():
        if count < 0:
            raise PerturbationError(f"negative sample count for {kind.value}: {count}")
        eligible = []
        for record in records:
            if len(record.segments) < kind.min_segments:
                logger.warning(
                    "video_skipped", video_id=record.video_id, kind=kind.value,
                    reason=f"needs at least {kind.min_segments} segments",
                )
            else:
                eligible.append(record)

        if count > len(eligible):
            logger.warning(
                "count_exceeds_eligible", kind=kind.value, requested=count, eligible=len(eligible)
            )
        chosen = make_rng(derive_seed(root_seed, "select", kind.value)).permutation(len(eligible))[:count]

        for position in sorted(int(c) for c in chosen):
            record = eligible[position]
            seed = derive_seed(root_seed, record.video_id, kind.value)
            try:
                sample = generate(record, PerturbationSpec(kind=kind, seed=seed), fps, placeholder=placeholder)
            except PerturbationError as e:
                logger.warning("video_skipped", video_id=record.video_id, kind=kind.value, reason=str(e))
                continue
            samples.append(sample)

        logger.info("perturbation_kind_done", kind=kind.value, requested=count, produced=sum(
            1 for s in samples if s.kind is kind
        ))
    return samples


def write_manifest(path: Path, header: ManifestHeader, samples: Iterable[PerturbedSample]) -> Path:
    """JSON Lines: header line then one sample per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header.model_dump_json()] + [s.model_dump_json() for s in samples]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path: Path) -> Tuple[ManifestHeader, List[PerturbedSample]]:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise ManifestError(f"manifest {path} is empty")

    try:
        header = ManifestHeader.model_validate_json(lines[0])
    except ValidationError as e:
        raise ManifestError(f"manifest {path} has no valid header line: {e}") from e
    if header.schema_version != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(f"unsupported manifest schema_version {header.schema_version!r}")
    if header.rng != RNG_ALGORITHM:
        raise ManifestError(f"manifest generated with unknown rng {header.rng!r}")

    samples = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            samples.append(PerturbedSample.model_validate_json(line))
        except ValidationError as e:
            raise ManifestError(f"{path}:{number}: invalid sample: {e}") from e
    return header, samples


def apply_frame_plan(sample: PerturbedSample, frames_dir: Path, out_dir: Path) -> Path:
    """Materialize a sample: copy source frames in plan order, write blanks as black frames"""
    sources = list_frame_files(frames_dir)
    if len(sources) != sample.frame_count:
        raise FrameDirectoryError(
            f"{frames_dir} holds {len(sources)} frames, plan for {sample.sample_id} expects {sample.frame_count}"
        )
    for position, source in enumerate(sample.frame_plan):
        if source is not None and source >= len(sources):
            raise FrameDirectoryError(f"plan position {position} references missing frame {source}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blank_png: Optional[bytes] = None
    for position, source in enumerate(sample.frame_plan):
        target = frame_path(out_dir, position)
        if source is None:
            if blank_png is None:
                blank_png = encode_png(Image.new("RGB", load_image(sources[0]).size))
            target.write_bytes(blank_png)
        else:
            shutil.copyfile(sources[source], target)

    logger.debug(
        "frame_plan_applied", sample_id=sample.sample_id, frames=sample.frame_count,
        blanks=len(sample.blank_positions),
    )
    return out_dir


def overlay_frames_dir(frames_dir: Path, fps: float = 1.0, style: Optional[OverlayStyle] = None) -> Path:
    """Burn timestamps into every frame in place; run after the frame plan is applied"""
    for index, path in enumerate(list_frame_files(frames_dir)):
        frame = Frame(index=index, timestamp=index / fps, pixels=load_image(path))
        path.write_bytes(encode_png(render_timestamp(frame, style).pixels))
    return Path(frames_dir)


def materialize_samples(
    samples: Sequence[PerturbedSample],
    frames_root: Path,
    out_root: Path,
    workers: int = 4,
    style: Optional[OverlayStyle] = None,
    overlay_timestamps: bool = False,
) -> List[Path]:
    """Apply every sample's plan in a bounded worker pool; output order follows samples"""

    def _work(sample: PerturbedSample) -> Path:
        out_dir = apply_frame_plan(sample, Path(frames_root) / sample.source_video_id, Path(out_root) / sample.sample_id)
        if overlay_timestamps:
            overlay_frames_dir(out_dir, sample.fps, style)
        return out_dir

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(_work, samples))
