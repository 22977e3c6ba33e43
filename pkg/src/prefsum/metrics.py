"""ROUGE recall metrics, the gold utility score and Spearman's rank correlation.

All metrics operate on token lists produced by :mod:`prefsum.corpus` and are
recall-oriented: candidates are scored by how much reference content they
cover.  Multi-reference scores are arithmetic means of per-reference recalls.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .mathutil import average_ranks

# Per-metric upper bounds used to balance the three ROUGE components of the
# gold utility; the weighted sum is then mapped to [0, 10].
ROUGE1_UPPER = 0.47
ROUGE2_UPPER = 0.22
ROUGESU4_UPPER = 0.18

SU4_MAX_DISTANCE = 4


class GoldUtilityUnavailable(Exception):
    """Raised when a gold-utility computation is requested without references."""


TokenSeq = Sequence[str]


def _ngram_counts(tokens: TokenSeq, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_recall(cand_counts: Counter, ref_counts: Counter) -> float:
    total = sum(ref_counts.values())
    if total == 0:
        return 0.0
    overlap = sum(min(count, cand_counts[unit]) for unit, count in ref_counts.items())
    return overlap / total


def _check_references(references: Sequence[TokenSeq]) -> None:
    if not references:
        raise ValueError("at least one reference is required")
    for ref in references:
        if len(ref) == 0:
            raise ValueError("empty reference summary")


def rouge_n(candidate: TokenSeq, references: Sequence[TokenSeq], n: int) -> float:
    """Clipped n-gram recall averaged over references (n in {1, 2})."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    _check_references(references)
    cand = _ngram_counts(candidate, n)
    return float(np.mean([_clipped_recall(cand, _ngram_counts(ref, n)) for ref in references]))


def _lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:
    """LCS recall: LCS(candidate, ref) / |ref|, averaged over references."""
    _check_references(references)
    return float(np.mean([_lcs_length(candidate, ref) / len(ref) for ref in references]))


def _su4_counts(tokens: TokenSeq) -> Counter:
    # Skip-bigrams at most SU4_MAX_DISTANCE apart, plus unigrams as their own
    # counting units (tagged to keep the two pools distinct).
    units: Counter = Counter(("u", tok) for tok in tokens)
    for i in range(len(tokens)):
        for j in range(i + 1, min(i + SU4_MAX_DISTANCE, len(tokens) - 1) + 1):
            units[("s", tokens[i], tokens[j])] += 1
    return units


def rouge_su4(candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:
    """Skip-bigram (max distance 4) plus unigram recall, averaged over references."""
    _check_references(references)
    cand = _su4_counts(candidate)
    return float(np.mean([_clipped_recall(cand, _su4_counts(ref)) for ref in references]))


def gold_utility(candidate: TokenSeq, references: Sequence[TokenSeq]) -> float:
    """Combined ROUGE recall score on the [0, 10] scale.

    The three components are divided by their upper bounds, summed, scaled by
    10/3 and clamped to [0, 10] (a candidate can exceed an upper bound).
    """
    if not references:
        raise GoldUtilityUnavailable("cluster has no reference summaries")
    value = (10.0 / 3.0) * (
        rouge_n(candidate, references, 1) / ROUGE1_UPPER
        + rouge_n(candidate, references, 2) / ROUGE2_UPPER
        + rouge_su4(candidate, references) / ROUGESU4_UPPER
    )
    return float(min(10.0, max(0.0, value)))


def summary_tokens(summary, cluster) -> list[str]:
    tokens: list[str] = []
    for sid in summary.sentence_ids:
        tokens.extend(cluster.sentences[sid].tokens)
    return tokens


def u_star(summary, cluster) -> float:
    """Gold utility of a summary against its cluster's references."""
    if not cluster.has_references:
        raise GoldUtilityUnavailable(f"cluster {cluster.id} has no references")
    return gold_utility(summary_tokens(summary, cluster), cluster.references)


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and of equal length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ValueError("rank correlation undefined for a constant vector")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
