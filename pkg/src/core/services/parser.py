"""
Lenient parsing of free-form model responses

Structured first: a JSON object or list anywhere in the text (whole text, fenced
block, or the outermost bracketed span). Otherwise a line grammar:

    [- ]<start> <sep> <end>: <caption>     sep in {"-", "–", "—", "to"}

Times are seconds ("12.5", "12.5s") or clock form ("01:05", "1:02:03"); decimal
commas are rejected. Parsers never raise on response text.
"""

import json
import math
import re
from typing import Any, Dict, Iterable, List, Optional, Tuple

import structlog
from pydantic import ValidationError

from ..models.responses import (
    MissingVerdict,
    OrderVerdict,
    RawModelResponse,
    SegmentParseResult,
    Task,
)
from ..models.temporal import ActionSegment, TimeInterval

logger = structlog.get_logger(__name__)

_TIME = r"\d+(?::\d{1,2}){1,2}(?:\.\d+)?|\d+(?:\.\d+)?"
_SEP = r"-|–|—|to"
SEGMENT_LINE = re.compile(
    rf"^\s*(?:[-*•]\s+|\d+[.)]\s+)?\[?\s*(?P<start>{_TIME})\s*s?\s*(?:{_SEP})\s*"
    rf"(?P<end>{_TIME})\s*s?\s*\]?\s*:\s*(?P<caption>.+?)\s*$",
    re.IGNORECASE,
)
TIME_SPAN = re.compile(rf"(?P<start>{_TIME})\s*s?\s*(?:{_SEP})\s*(?P<end>{_TIME})\s*s?", re.IGNORECASE)
LABEL_LINE = re.compile(
    r"^\s*(?:[-*•]\s+)?(?:procedure(?:\s+(?:label|name))?|skill)\s*[:\-]\s*(?P<label>.+?)\s*$",
    re.IGNORECASE,
)
_FENCED = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL | re.IGNORECASE)

_START_KEYS = ("start", "start_time", "begin", "from", "start_sec")
_END_KEYS = ("end", "end_time", "stop", "to", "end_sec")
_CAPTION_KEYS = ("caption", "description", "text", "action", "label", "step")
_SPAN_KEYS = ("interval", "timestamp", "timestamps", "time", "span")
_LIST_KEYS = ("segments", "events", "actions", "steps", "captions", "subactions")
_PROCEDURE_KEYS = ("procedure", "procedure_label", "procedure_name", "label", "skill")
_REASONING_KEYS = ("reasoning", "rationale", "explanation", "reason")

_INDEX = re.compile(r"\d{1,9}", re.ASCII)

_TRUE = {"true", "yes", "correct", "y", "1"}
_FALSE = {"false", "no", "incorrect", "n", "0"}


def parse_time(value: Any) -> Optional[float]:
    """Seconds from a number, "12.5", "12.5s" or "MM:SS[.fff]" / "H:MM:SS"; None if invalid"""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        try:
            seconds = float(value)
        except OverflowError:
            return None
        return seconds if math.isfinite(seconds) and seconds >= 0 else None
    if not isinstance(value, str):
        return None
    text = value.strip().lower()
    if text.endswith("s"):
        text = text[:-1].rstrip()
    if not re.fullmatch(_TIME, text, re.ASCII):
        return None
    seconds = 0.0
    for part in text.split(":"):
        seconds = seconds * 60 + float(part)
    return seconds if math.isfinite(seconds) else None


def parse_bool(value: Any) -> Optional[bool]:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        text = value.strip().lower().rstrip(".")
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
    return None


def _pick(obj: Dict[str, Any], keys: Iterable[str]) -> Any:
    lowered = {str(k).strip().lower(): v for k, v in obj.items()}
    for key in keys:
        if key in lowered:
            return lowered[key]
    return None


def _bracket_span(text: str) -> Optional[str]:
    starts = [i for i in (text.find("{"), text.find("[")) if i >= 0]
    if not starts:
        return None
    start = min(starts)
    closer = "}" if text[start] == "{" else "]"
    end = text.rfind(closer)
    return text[start:end + 1] if end > start else None


def extract_structured(text: str) -> Optional[Any]:
    """First JSON object or list found in the text, or None"""
    candidates = [text.strip()]
    candidates.extend(block.strip() for block in _FENCED.findall(text))
    span = _bracket_span(text)
    if span:
        candidates.append(span)
    for candidate in candidates:
        if not candidate or candidate[0] not in "{[":
            continue
        # ValueError also covers integers past the int digit limit
        try:
            value = json.loads(candidate)
        except (ValueError, RecursionError):
            continue
        if isinstance(value, (dict, list)):
            return value
    return None


def _make_interval(start: Any, end: Any) -> Optional[TimeInterval]:
    start_s, end_s = parse_time(start), parse_time(end)
    if start_s is None or end_s is None:
        return None
    try:
        return TimeInterval.of(start_s, end_s)
    except ValidationError:
        return None


def _segment_from_item(item: Any) -> Optional[ActionSegment]:
    interval: Optional[TimeInterval] = None
    caption: Any = None
    if isinstance(item, dict):
        span = _pick(item, _SPAN_KEYS)
        if isinstance(span, (list, tuple)) and len(span) == 2:
            interval = _make_interval(*span)
        elif isinstance(span, str):
            match = TIME_SPAN.fullmatch(span.strip())
            interval = _make_interval(match["start"], match["end"]) if match else None
        else:
            interval = _make_interval(_pick(item, _START_KEYS), _pick(item, _END_KEYS))
        caption = _pick(item, _CAPTION_KEYS)
    elif isinstance(item, (list, tuple)) and len(item) == 3:
        interval = _make_interval(item[0], item[1])
        caption = item[2]
    if interval is None or not isinstance(caption, str) or not caption.strip():
        return None
    return ActionSegment(interval=interval, caption=caption)


def _structured_items(value: Any) -> Optional[List[Any]]:
    if isinstance(value, list):
        return value
    if isinstance(value, dict):
        items = _pick(value, _LIST_KEYS)
        if isinstance(items, list):
            return items
    return None


def _parse_lines(text: str, skip_labels: bool) -> Tuple[List[ActionSegment], int]:
    segments: List[ActionSegment] = []
    malformed = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        if skip_labels and LABEL_LINE.match(line):
            continue
        match = SEGMENT_LINE.match(line)
        interval = _make_interval(match["start"], match["end"]) if match else None
        if interval is None or not match["caption"].strip():
            malformed += 1
            continue
        segments.append(ActionSegment(interval=interval, caption=match["caption"]))
    return segments, malformed


def parse_segment_list(response: RawModelResponse) -> SegmentParseResult:
    """Timed captions of a dense_caption or procedure_id response"""
    if response.task not in (Task.DENSE_CAPTION, Task.PROCEDURE_ID):
        raise ValueError(f"segment lists are not parsed for task {response.task.value}")
    text = response.text or ""

    items = _structured_items(extract_structured(text))
    if items is not None:
        segments = [s for s in (_segment_from_item(item) for item in items) if s is not None]
        result = SegmentParseResult(
            segments=sorted(segments, key=lambda s: (s.start, s.end)),
            malformed=len(items) - len(segments),
            strategy="structured",
        )
    else:
        segments, malformed = _parse_lines(text, skip_labels=response.task is Task.PROCEDURE_ID)
        result = SegmentParseResult(
            segments=sorted(segments, key=lambda s: (s.start, s.end)),
            malformed=malformed,
            strategy="lines" if segments else "none",
        )

    if result.failed:
        logger.debug("segment_parse_failed", request_id=response.request_id, malformed=result.malformed)
    return result


def parse_procedure_label(response: RawModelResponse) -> Optional[str]:
    """Procedure name from a procedure_id response, None when absent"""
    text = response.text or ""
    structured = extract_structured(text)
    if isinstance(structured, dict):
        label = _pick(structured, _PROCEDURE_KEYS)
        if isinstance(label, str) and label.strip():
            return label.strip()

    for line in text.splitlines():
        match = LABEL_LINE.match(line)
        if match:
            return match["label"].strip().strip(".").strip()

    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) == 1 and not TIME_SPAN.search(lines[0]) and lines[0][0] not in "{[":
        return lines[0].strip(".").strip()
    return None


def _int_list(value: Any) -> Optional[List[int]]:
    if isinstance(value, (int, str)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list):
        return None
    result = []
    for item in value:
        if isinstance(item, bool):
            return None
        if isinstance(item, int):
            result.append(item)
        elif isinstance(item, str) and _INDEX.fullmatch(item.strip()):
            result.append(int(item.strip()))
        else:
            return None
    return result


def _reasoning(obj: Dict[str, Any]) -> str:
    value = _pick(obj, _REASONING_KEYS)
    return value.strip() if isinstance(value, str) else ""


_ORDER_NEGATIVE = re.compile(
    r"\b(?:incorrect|out\s+of\s+(?:order|sequence)|wrong\s+order|misplaced|misordered)\b"
    # a negated positive phrase is negative
    r"|(?:\b(?:not|never)|n['’]t)\s+(?:\w+\s+){0,2}?(?:correct|right|ordered|in\s+(?:\w+\s+){0,2}?order)\b",
    re.IGNORECASE,
)
_ORDER_POSITIVE = re.compile(r"\b(?:correct|in\s+(?:the\s+right\s+|chronological\s+)?order)\b", re.IGNORECASE)
_SEGMENT_REFS = re.compile(r"\bsegments?\s+((?:#?\d+(?:\s*(?:,|and|&)\s*)?)+)", re.IGNORECASE)


def parse_order_verdict(response: RawModelResponse, segment_count: Optional[int] = None) -> OrderVerdict:
    """Order-correction verdict; unrecoverable text yields an abstention.

    Segment indices are 0-based playback positions. Indices outside
    segment_count are dropped, as is a corrected order that is not a
    permutation of the right size.
    """
    text = response.text or ""

    def in_range(indices: List[int]) -> List[int]:
        unique = sorted(set(i for i in indices if i >= 0))
        return [i for i in unique if segment_count is None or i < segment_count]

    structured = extract_structured(text)
    if isinstance(structured, dict):
        is_correct = parse_bool(_pick(structured, ("is_correct", "correct", "sequence_correct", "in_order")))
        misplaced = _int_list(_pick(structured, ("misplaced", "misplaced_indices", "misplaced_segments", "errors")))
        order = _int_list(_pick(structured, ("corrected_order", "correct_order", "reconstructed_order", "order")))
        if is_correct is None and misplaced is not None:
            is_correct = not misplaced
        if is_correct is not None:
            size = segment_count if segment_count is not None else (len(order) if order else 0)
            if order is not None and not _is_permutation_of(order, size):
                order = None
            return OrderVerdict(
                is_correct=is_correct,
                misplaced=[] if is_correct else in_range(misplaced or []),
                corrected_order=order,
                reasoning=_reasoning(structured),
            )
        # keys like "misplaced" would trip the keyword scan
        logger.debug("order_verdict_abstained", request_id=response.request_id)
        return OrderVerdict.abstention(text.strip())

    if _ORDER_NEGATIVE.search(text):
        refs = [
            int(n) for group in _SEGMENT_REFS.findall(text)
            for n in re.findall(r"\d+", group, re.ASCII) if len(n) <= 9
        ]
        return OrderVerdict(is_correct=False, misplaced=in_range(refs), reasoning=text.strip())
    if _ORDER_POSITIVE.search(text):
        identity = list(range(segment_count)) if segment_count else None
        return OrderVerdict(is_correct=True, corrected_order=identity, reasoning=text.strip())

    logger.debug("order_verdict_abstained", request_id=response.request_id)
    return OrderVerdict.abstention(text.strip())


def _is_permutation_of(values: List[int], size: int) -> bool:
    return size > 0 and sorted(values) == list(range(size))


_MISSING_NEGATIVE = re.compile(
    r"\b(?:no\s+(?:step|action|event|segment)s?\s+(?:is\s+|are\s+)?missing|nothing\s+is\s+missing|"
    r"no\s+missing|(?:is|appears|looks)\s+complete|not\s+missing)\b",
    re.IGNORECASE,
)
_MISSING_POSITIVE = re.compile(r"\bmissing\b", re.IGNORECASE)
_MISSING_CAPTION = re.compile(
    r"\bmissing\s+(?:step|action|event|segment)\s*(?:is)?\s*[:\-]\s*(?P<caption>.+?)\s*$",
    re.IGNORECASE | re.MULTILINE,
)


def parse_missing_verdict(response: RawModelResponse) -> MissingVerdict:
    """Missing-event verdict; a claim of a missing step without its caption abstains"""
    text = response.text or ""

    structured = extract_structured(text)
    if isinstance(structured, dict):
        has_missing = parse_bool(_pick(structured, ("has_missing", "missing", "is_missing", "has_missing_step")))
        if has_missing is None:
            complete = parse_bool(_pick(structured, ("is_complete", "complete")))
            has_missing = None if complete is None else not complete
        if has_missing is False:
            return MissingVerdict(has_missing=False, reasoning=_reasoning(structured))
        if has_missing:
            caption = _pick(structured, ("predicted_caption", "caption", "missing_step", "missing_action", "description"))
            span = _pick(structured, _SPAN_KEYS)
            if isinstance(span, (list, tuple)) and len(span) == 2:
                interval = _make_interval(*span)
            else:
                interval = _make_interval(_pick(structured, _START_KEYS), _pick(structured, _END_KEYS))
            if isinstance(caption, str) and caption.strip():
                return MissingVerdict(
                    has_missing=True, predicted_interval=interval,
                    predicted_caption=caption.strip(), reasoning=_reasoning(structured),
                )

    if _MISSING_NEGATIVE.search(text):
        return MissingVerdict(has_missing=False, reasoning=text.strip())
    if _MISSING_POSITIVE.search(text):
        caption = None
        interval = None
        for line in text.splitlines():
            match = SEGMENT_LINE.match(line)
            if match:
                interval = _make_interval(match["start"], match["end"])
                caption = match["caption"].strip() if interval else None
                if caption:
                    break
        if not caption:
            named = _MISSING_CAPTION.search(text)
            caption = named["caption"].strip() if named else None
            timed = SEGMENT_LINE.match(caption) if caption else None
            if timed:
                caption = timed["caption"].strip()
                interval = _make_interval(timed["start"], timed["end"])
            else:
                span = TIME_SPAN.search(text)
                interval = _make_interval(span["start"], span["end"]) if span else None
        if caption:
            return MissingVerdict(
                has_missing=True, predicted_interval=interval,
                predicted_caption=caption, reasoning=text.strip(),
            )

    logger.debug("missing_verdict_abstained", request_id=response.request_id)
    return MissingVerdict.abstention(text.strip())
