"""Query selection for the preference-collection loop.

The active-learning querier scores every unshown pool candidate with four
heuristics (utility gap, diversity from the previous summary, density in
feature space, utility uncertainty), min-max normalizes each component over
the pool and returns the argmax of their weighted sum.  Random and Gibbs
pair sampling are provided as baselines.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mathutil import sigmoid, softmax
from .reward import UtilityModel
from .summary_db import SummaryDB


class BudgetExhausted(Exception):
    """Every pool candidate has already been shown."""


class Strategy(str, enum.Enum):
    AL = "al"
    RANDOM = "random"
    GIBBS = "gibbs"
    JN = "jn"


@dataclass(frozen=True)
class QueryWeights:
    """Weights of the four selection heuristics; they must sum to one."""

    gap: float = 0.0
    diversity: float = 1.0
    density: float = 0.0
    uncertainty: float = 0.0

    def __post_init__(self) -> None:
        values = (self.gap, self.diversity, self.density, self.uncertainty)
        if any(v < 0.0 for v in values):
            raise ValueError("heuristic weights must be non-negative")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ValueError("heuristic weights must sum to 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.gap, self.diversity, self.density, self.uncertainty])


@dataclass
class QueryState:
    shown: set[int] = field(default_factory=set)
    old_id: int | None = None
    round: int = 0

    def mark_shown(self, summary_id: int) -> None:
        self.shown.add(summary_id)


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.zeros_like(values)


def density_scores(db: SummaryDB) -> np.ndarray:
    """Raw density of each candidate: its highest cosine to any other candidate.

    Model-independent, so computed once per pool and cached on it.
    """
    cached = getattr(db, "_density_cache", None)
    if cached is not None:
        return cached
    features = db.feature_matrix
    n = len(db)
    best = np.full(n, -np.inf)
    block = 512
    for start in range(0, n, block):
        rows = features[start : start + block]
        sims = rows @ features.T
        for local, global_idx in enumerate(range(start, min(start + block, n))):
            sims[local, global_idx] = -np.inf
        best[start : start + block] = sims.max(axis=1)
    best[~np.isfinite(best)] = 0.0
    object.__setattr__(db, "_density_cache", best)
    return best


def raw_components(
    db: SummaryDB, old_id: int | None, model: UtilityModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Raw (gap, diversity, density, uncertainty) heuristic scores over the pool.

    In the very first selection there is no old summary: the gap component is
    the utility itself and diversity is zero.
    """
    utilities = model.blended_over_db(db)
    features = db.feature_matrix
    if old_id is None:
        gap_raw = utilities.copy()
        div_raw = np.zeros(len(db))
    else:
        gap_raw = np.abs(utilities - utilities[old_id])
        div_raw = 1.0 - features @ features[old_id]
    den_raw = density_scores(db)

    normalized_u = model.normalized_over_db(db)
    # On a non-negative [0, 10] utility scale the raw logistic would sit above
    # 0.5 almost everywhere, so it is centred at the pool median.
    pb = sigmoid(normalized_u - np.median(normalized_u))
    unc_raw = np.where(pb >= 0.5, 1.0 - pb, pb)
    return gap_raw, div_raw, den_raw, unc_raw


def component_scores(
    db: SummaryDB, old_id: int | None, model: UtilityModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Min-max normalized heuristic scores over the pool."""
    gap_raw, div_raw, den_raw, unc_raw = raw_components(db, old_id, model)
    return _minmax(gap_raw), _minmax(div_raw), _minmax(den_raw), _minmax(unc_raw)


def al_scores(
    candidate_id: int, old_id: int | None, model: UtilityModel, db: SummaryDB
) -> tuple[float, float, float, float]:
    """Normalized heuristic scores of one candidate against the old summary."""
    gap, div, den, unc = component_scores(db, old_id, model)
    return (
        float(gap[candidate_id]),
        float(div[candidate_id]),
        float(den[candidate_id]),
        float(unc[candidate_id]),
    )


def select_next(
    db: SummaryDB, state: QueryState, model: UtilityModel, weights: QueryWeights
) -> int:
    """Pick the unshown candidate maximizing the weighted heuristic sum."""
    if len(state.shown) >= len(db):
        raise BudgetExhausted("all pool candidates have been shown")
    gap, div, den, unc = component_scores(db, state.old_id, model)
    scores = (
        weights.gap * gap
        + weights.diversity * div
        + weights.density * den
        + weights.uncertainty * unc
    )
    if state.shown:
        scores[list(state.shown)] = -np.inf
    return int(np.argmax(scores))


def random_select(db: SummaryDB, state: QueryState, rng: np.random.Generator) -> int:
    """Uniform choice among unshown candidates."""
    unshown = [i for i in range(len(db)) if i not in state.shown]
    if not unshown:
        raise BudgetExhausted("all pool candidates have been shown")
    return int(unshown[rng.integers(len(unshown))])


def gibbs_pair_distribution(utilities: np.ndarray) -> np.ndarray:
    """Exact pair-presentation probabilities: P(i, j) proportional to exp(u_i - u_j).

    The normalizer of the double sum factorizes, so the matrix is the outer
    product of softmax(u) and softmax(-u).
    """
    u = np.asarray(utilities, dtype=float)
    return np.outer(softmax(u), softmax(-u))


def gibbs_sample_pair(
    utilities: np.ndarray, rng: np.random.Generator
) -> tuple[int, int]:
    """Sample an ordered pair from the factorized form of the pair softmax.

    Sampling the two sides independently can return i == j, which the double
    sum permits; such a collision is resampled once and then accepted.
    """
    u = np.asarray(utilities, dtype=float)
    if len(u) < 2:
        raise ValueError("need at least two candidates")
    p_first = softmax(u)
    p_second = softmax(-u)
    i = int(rng.choice(len(u), p=p_first))
    j = int(rng.choice(len(u), p=p_second))
    if i == j:
        i = int(rng.choice(len(u), p=p_first))
        j = int(rng.choice(len(u), p=p_second))
    return i, j
