"""
Brute-force reference implementations used only by the test suites

Each oracle trades speed for obviousness: grid counting instead of interval
arithmetic, full tables instead of rolling rows, exhaustive search instead of
greedy passes.
"""

import json
from collections import namedtuple
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

FIXTURES_DIR = Path(__file__).parent / "fixtures"

Span = Tuple[float, float]

OracleCase = namedtuple("OracleCase", ["case_id", "oracle", "inputs", "expected"])


def load_oracle_cases(path: Path = FIXTURES_DIR / "oracle_cases.json") -> List[OracleCase]:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    return [OracleCase(c["case_id"], c["oracle"], c["inputs"], c["expected"]) for c in document["cases"]]


def _cells(lo: float, hi: float, resolution: float) -> np.ndarray:
    count = int(round((hi - lo) / resolution))
    return lo + (np.arange(count) + 0.5) * resolution


def _inside(centres: np.ndarray, span: Span) -> np.ndarray:
    return (centres >= span[0]) & (centres < span[1])


def oracle_iou_grid(a: Span, b: Span, resolution: float = 0.001) -> float:
    """IoU by counting resolution-sized cells whose centre lies in each span"""
    lo = np.floor(min(a[0], b[0]) / resolution) * resolution
    hi = np.ceil(max(a[1], b[1]) / resolution) * resolution
    centres = _cells(lo, hi, resolution)
    in_a, in_b = _inside(centres, a), _inside(centres, b)
    union = np.count_nonzero(in_a | in_b)
    return np.count_nonzero(in_a & in_b) / union if union else 0.0


def oracle_coverage_grid(gt: Sequence[Span], pred: Sequence[Span], resolution: float = 0.001) -> float:
    """Covered share of the ground-truth union, counted cell by cell"""
    if not gt:
        return 0.0
    spans = list(gt) + list(pred)
    lo = np.floor(min(s[0] for s in spans) / resolution) * resolution
    hi = np.ceil(max(s[1] for s in spans) / resolution) * resolution
    centres = _cells(lo, hi, resolution)
    in_gt = np.zeros(centres.shape, dtype=bool)
    for span in gt:
        in_gt |= _inside(centres, span)
    in_pred = np.zeros(centres.shape, dtype=bool)
    for span in pred:
        in_pred |= _inside(centres, span)
    total = np.count_nonzero(in_gt)
    return np.count_nonzero(in_gt & in_pred) / total if total else 0.0


def plain_iou(a: Span, b: Span) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    return inter / ((a[1] - a[0]) + (b[1] - b[0]) - inter)


def _max_assignment(n_left: int, n_right: int, allowed) -> int:
    best = 0

    def search(i: int, used: frozenset, size: int) -> None:
        nonlocal best
        if size + (n_left - i) <= best:
            return
        if i == n_left:
            best = max(best, size)
            return
        for j in range(n_right):
            if j not in used and allowed(i, j):
                search(i + 1, used | {j}, size + 1)
        search(i + 1, used, size)

    search(0, frozenset(), 0)
    return best


def oracle_matching_exhaustive(preds: Sequence[Span], gts: Sequence[Span], threshold: float) -> int:
    """Largest one-to-one matching with every pair at IoU >= threshold"""
    assert len(preds) * len(gts) <= 36, "exhaustive search is limited to 6x6"
    return _max_assignment(len(preds), len(gts), lambda i, j: plain_iou(preds[i], gts[j]) >= threshold)


def oracle_hit_exhaustive(pred_starts: Sequence[float], gt_starts: Sequence[float], tolerance: float) -> int:
    """Largest one-to-one pairing of starts within the tolerance"""
    return _max_assignment(
        len(pred_starts), len(gt_starts),
        lambda i, j: abs(pred_starts[i] - gt_starts[j]) <= tolerance + 1e-9,
    )


def oracle_lcs_dp(a: Sequence[str], b: Sequence[str]) -> int:
    """Full (len(a)+1) x (len(b)+1) table"""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def oracle_token_overlap(reference: Sequence[str], candidate: Sequence[str]) -> int:
    """Multiset intersection size by striking out matched tokens one at a time"""
    remaining = list(reference)
    overlap = 0
    for token in candidate:
        if token in remaining:
            remaining.remove(token)
            overlap += 1
    return overlap


def f_measure(overlap: int, reference_len: int, candidate_len: int) -> float:
    if overlap == 0:
        return 0.0
    precision, recall = overlap / candidate_len, overlap / reference_len
    return 2 * precision * recall / (precision + recall)
