"""
Annotation file ingestion and writing

Schema (JSON, version 1.0):
    {"schema_version": "1.0",
     "videos": [{"video_id": str, "procedure_label": str, "duration": float,
                 "segments": [{"start": float, "end": float, "caption": str}, ...]}]}
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import structlog
from pydantic import ValidationError

from ..errors import AnnotationError, InputError
from ..models.temporal import TIME_TOLERANCE, ActionSegment, AnnotationRecord

logger = structlog.get_logger(__name__)

ANNOTATION_SCHEMA_VERSION = "1.0"


def _first_error(error: ValidationError) -> str:
    details = error.errors()
    return details[0]["msg"] if details else str(error)


def _parse_record(raw: Dict[str, Any], position: int) -> AnnotationRecord:
    if not isinstance(raw, dict):
        raise AnnotationError(f"record {position} is not an object")
    video_id = raw.get("video_id")
    if not video_id:
        raise AnnotationError(f"record {position} has no video_id")

    try:
        duration = float(raw["duration"])
    except (KeyError, TypeError, ValueError):
        raise AnnotationError("missing or non-numeric duration", video_id=video_id)

    raw_segments = raw.get("segments")
    if not isinstance(raw_segments, list):
        raise AnnotationError("segments must be a list", video_id=video_id)

    segments: List[ActionSegment] = []
    for index, item in enumerate(raw_segments):
        try:
            segment = ActionSegment.of(float(item["start"]), float(item["end"]), str(item["caption"]))
        except ValidationError as e:
            raise AnnotationError(_first_error(e), video_id=video_id, segment_index=index) from e
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"malformed segment: {e}", video_id=video_id, segment_index=index) from e
        if segment.end > duration + TIME_TOLERANCE:
            raise AnnotationError(
                f"segment ends at {segment.end} beyond duration {duration}",
                video_id=video_id,
                segment_index=index,
            )
        segments.append(segment)

    try:
        return AnnotationRecord(
            video_id=video_id,
            procedure_label=str(raw.get("procedure_label", "")).strip(),
            duration=duration,
            segments=tuple(segments),
        )
    except ValidationError as e:
        raise AnnotationError(_first_error(e), video_id=video_id) from e


def parse_annotations(path: Path) -> List[AnnotationRecord]:
    """Load and validate an annotation file; segments come back sorted by start"""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"annotation file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InputError(f"annotation file {path} is not valid JSON: {e}") from e

    if not isinstance(document, dict):
        raise AnnotationError("annotation document must be an object")
    version = document.get("schema_version")
    if version != ANNOTATION_SCHEMA_VERSION:
        raise AnnotationError(
            f"unsupported annotation schema_version {version!r}, expected {ANNOTATION_SCHEMA_VERSION!r}"
        )
    videos = document.get("videos")
    if not isinstance(videos, list):
        raise AnnotationError("annotation document has no 'videos' list")

    records = [_parse_record(raw, position) for position, raw in enumerate(videos)]
    seen = set()
    for record in records:
        if record.video_id in seen:
            raise AnnotationError("duplicate video_id", video_id=record.video_id)
        seen.add(record.video_id)

    logger.info("annotations_loaded", path=str(path), videos=len(records))
    return records


def record_to_dict(record: AnnotationRecord) -> Dict[str, Any]:
    return {
        "video_id": record.video_id,
        "procedure_label": record.procedure_label,
        "duration": record.duration,
        "segments": [
            {"start": s.start, "end": s.end, "caption": s.caption} for s in record.segments
        ],
    }


def write_annotations(records: List[AnnotationRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "schema_version": ANNOTATION_SCHEMA_VERSION,
        "videos": [record_to_dict(r) for r in records],
    }
    path.write_text(json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path
