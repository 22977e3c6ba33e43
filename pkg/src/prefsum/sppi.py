"""SPPI baseline: Gibbs pair querying with per-round policy-gradient updates.

Each round samples an ordered summary pair with probability proportional to
exp(utility gap), asks the oracle, and ascends the pair-selection objective
with an exact score-function gradient.  The pair softmax factorizes, so the
expected feature difference is computed exactly rather than estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mathutil import softmax
from .querier import gibbs_sample_pair
from .reward import Direction, PreferenceRecord
from .summary_db import Summary, SummaryDB

DEFAULT_SPPI_LEARNING_RATE = 1e-3


@dataclass
class SppiModel:
    w: np.ndarray
    gamma: float = DEFAULT_SPPI_LEARNING_RATE


def expected_pair_feature_diff(utilities: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Exact E[phi(first) - phi(second)] under the factorized pair softmax."""
    return softmax(utilities) @ features - softmax(-utilities) @ features


def pair_log_policy_gradient(
    utilities: np.ndarray, features: np.ndarray, pair: tuple[int, int]
) -> np.ndarray:
    """Gradient of log pi(pair) with respect to the utility weights."""
    i, j = pair
    return features[i] - features[j] - expected_pair_feature_diff(utilities, features)


def sppi_round(
    model: SppiModel,
    db: SummaryDB,
    oracle,
    rng: np.random.Generator,
    round_index: int = 0,
) -> tuple[SppiModel, PreferenceRecord]:
    """Sample a pair, collect the preference, apply one policy-gradient step.

    The preference enters as feedback p in {0, 1} for the ordered pair, so a
    round where the second summary wins leaves the weights unchanged.
    """
    if len(db) < 2:
        raise ValueError("need at least two pool candidates")
    features = db.feature_matrix
    utilities = features @ model.w
    i, j = gibbs_sample_pair(utilities, rng)
    direction = oracle.prefer(db[i], db[j])
    if direction is Direction.LEFT:
        model.w += model.gamma * pair_log_policy_gradient(utilities, features, (i, j))
    record = PreferenceRecord(
        round=round_index,
        left_id=i,
        right_id=j,
        direction=direction,
        source=oracle.source,
    )
    return model, record


@dataclass
class SppiResult:
    summary: Summary
    model: SppiModel
    records: list[PreferenceRecord] = field(default_factory=list)

    @property
    def shown_ids(self) -> set[int]:
        shown: set[int] = set()
        for r in self.records:
            shown.update((r.left_id, r.right_id))
        return shown


def sppi_run(
    cluster,
    db: SummaryDB,
    oracle,
    n_rounds: int,
    gamma: float = DEFAULT_SPPI_LEARNING_RATE,
    seed: int = 0,
) -> SppiResult:
    """Run the full loop and output the pool argmax under the final weights.

    Ties go to the lowest summary id, so with zero rounds (weights still zero)
    the first pool summary is returned.
    """
    if n_rounds < 0:
        raise ValueError("round budget must be non-negative")
    rng = np.random.default_rng(seed)
    model = SppiModel(w=np.zeros(db.feature_matrix.shape[1]), gamma=gamma)
    records: list[PreferenceRecord] = []
    for round_index in range(1, n_rounds + 1):
        model, record = sppi_round(model, db, oracle, rng, round_index)
        records.append(record)
    best = int(np.argmax(db.feature_matrix @ model.w))
    return SppiResult(summary=db[best], model=model, records=records)
