"""Simulated users providing pairwise preferences over summaries.

The logistic noise oracle prefers the higher-utility summary with probability
sigmoid(gap / m) on the [0, 10] gold-utility scale: larger gaps give more
reliable answers, and the flatness parameter m controls the noise level.
The calibrated default is m = 2.14.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .mathutil import golden_section_maximize, log_sigmoid, sigmoid
from .metrics import u_star
from .reward import Direction, Source

DEFAULT_FLATNESS = 2.14

_M_BOUNDS = (1e-3, 1e3)
_M_LOG_TOL = 1e-4


def lno_prefer_probability(u_i: float, u_j: float, m: float) -> float:
    """Probability that the first summary is preferred under flatness m."""
    if m <= 0.0:
        raise ValueError("flatness m must be positive")
    return sigmoid((float(u_i) - float(u_j)) / m)


class PerfectOracle:
    """Noise-free preferences induced by the utilities; exact ties go left."""

    source = Source.PERFECT

    def prefer_values(self, u_i: float, u_j: float) -> Direction:
        return Direction.LEFT if u_i >= u_j else Direction.RIGHT


class LnoOracle:
    """Logistic noise oracle with its own random stream."""

    source = Source.LNO

    def __init__(self, m: float = DEFAULT_FLATNESS, seed: int = 0) -> None:
        if m <= 0.0:
            raise ValueError("flatness m must be positive")
        self.m = float(m)
        self.rng = np.random.default_rng(seed)

    def prefer_values(self, u_i: float, u_j: float) -> Direction:
        p_left = lno_prefer_probability(u_i, u_j, self.m)
        return Direction.LEFT if self.rng.random() < p_left else Direction.RIGHT


class SummaryOracle:
    """Binds a value oracle to a cluster so it can judge summary pairs.

    Gold utilities are computed lazily and cached per summary id.
    """

    def __init__(self, oracle, cluster) -> None:
        self.oracle = oracle
        self.cluster = cluster
        self._cache: dict[int, float] = {}

    @property
    def source(self) -> Source:
        return self.oracle.source

    def utility(self, summary) -> float:
        value = self._cache.get(summary.id)
        if value is None or summary.id < 0:
            value = u_star(summary, self.cluster)
            if summary.id >= 0:
                self._cache[summary.id] = value
        return value

    def prefer(self, left, right) -> Direction:
        return self.oracle.prefer_values(self.utility(left), self.utility(right))


def fit_m(records: Sequence[tuple[float, float, Direction]]) -> float:
    """Maximum-likelihood flatness for observed (u_left, u_right, direction) triples.

    The 1-d log-likelihood is maximized by golden-section search over log m on
    [1e-3, 1e3]; a flat likelihood (all utility pairs tied) is an error.
    """
    if not records:
        raise ValueError("need at least one preference record")
    gaps = []
    for u_left, u_right, direction in records:
        direction = Direction(direction)
        chosen, other = (u_left, u_right) if direction is Direction.LEFT else (u_right, u_left)
        gaps.append(float(chosen) - float(other))
    gaps_arr = np.asarray(gaps)
    if np.all(gaps_arr == 0.0):
        raise ValueError("all utility pairs tied; likelihood is flat in m")

    def log_likelihood_at(log_m: float) -> float:
        return float(np.sum(log_sigmoid(gaps_arr / math.exp(log_m))))

    best_log_m = golden_section_maximize(
        log_likelihood_at, math.log(_M_BOUNDS[0]), math.log(_M_BOUNDS[1]), _M_LOG_TOL
    )
    return math.exp(best_log_m)


def lno_log_likelihood(records: Sequence[tuple[float, float, Direction]], m: float) -> float:
    """Log-likelihood of the records under flatness m (for diagnostics and tests)."""
    if m <= 0.0:
        raise ValueError("flatness m must be positive")
    total = 0.0
    for u_left, u_right, direction in records:
        direction = Direction(direction)
        chosen, other = (u_left, u_right) if direction is Direction.LEFT else (u_right, u_left)
        total += float(log_sigmoid((chosen - other) / m))
    return total
