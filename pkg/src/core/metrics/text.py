"""
Caption quality metrics over matched segment pairs
"""

import re
from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from ..models.report import CaptionScore
from ..models.temporal import ActionSegment
from .matching import MatchResult

_NON_ALNUM = re.compile(r"[\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenSequence:
    """Lowercased alphanumeric tokens; build with normalize()"""

    tokens: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def normalize(text: str) -> TokenSequence:
    """Lowercase, turn every non letter/digit into a space, split on whitespace"""
    return TokenSequence(tuple(_NON_ALNUM.sub(" ", text.lower()).split()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    # rolling single row of the classic table
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def _f_measure(overlap: int, reference_len: int, candidate_len: int) -> float:
    if overlap == 0 or reference_len == 0 or candidate_len == 0:
        return 0.0
    precision = overlap / candidate_len
    recall = overlap / reference_len
    return 2 * precision * recall / (precision + recall)


def rouge_l(reference: TokenSequence, candidate: TokenSequence) -> float:
    """LCS-based F-measure with beta = 1"""
    return _f_measure(lcs_length(reference.tokens, candidate.tokens), len(reference), len(candidate))


def token_f1(reference: TokenSequence, candidate: TokenSequence) -> float:
    """Bag-of-words F1; duplicates count up to their multiplicity on both sides"""
    overlap = sum((Counter(reference.tokens) & Counter(candidate.tokens)).values())
    return _f_measure(overlap, len(reference), len(candidate))


def score_caption_pair(reference: str, candidate: str) -> CaptionScore:
    ref, cand = normalize(reference), normalize(candidate)
    return CaptionScore(rouge_l=rouge_l(ref, cand), token_f1=token_f1(ref, cand))


def score_matched_pairs(
    matches: MatchResult,
    pred_segments: Sequence[ActionSegment],
    gt_segments: Sequence[ActionSegment],
) -> List[CaptionScore]:
    """Per-pair scores, in match acceptance order"""
    return [
        score_caption_pair(gt_segments[pair.gt_index].caption, pred_segments[pair.pred_index].caption)
        for pair in matches.pairs
    ]


def mean_caption_score(scores: Sequence[CaptionScore]) -> CaptionScore:
    if not scores:
        return CaptionScore()
    return CaptionScore(
        rouge_l=min(1.0, sum(s.rouge_l for s in scores) / len(scores)),
        token_f1=min(1.0, sum(s.token_f1 for s in scores) / len(scores)),
    )


def score_matched_captions(
    matches: MatchResult,
    pred_segments: Sequence[ActionSegment],
    gt_segments: Sequence[ActionSegment],
) -> CaptionScore:
    """Mean caption score over matched pairs; unmatched segments contribute nothing"""
    return mean_caption_score(score_matched_pairs(matches, pred_segments, gt_segments))
