"""Round-by-round preference-collection sessions.

The same session objects drive simulated runs in the harness, live human
sessions behind the HTTP service, and offline replays of recorded preference
sequences, so all three produce identical models from identical inputs.
"""

from __future__ import annotations

import time

import numpy as np

from .querier import (
    QueryState,
    QueryWeights,
    Strategy,
    gibbs_sample_pair,
    random_select,
    select_next,
)
from .reward import Direction, PreferenceRecord, Source, UtilityModel, bt_update
from .sppi import SppiModel, pair_log_policy_gradient
from .summary_db import SummaryDB


class SessionFinished(Exception):
    """submit() was called after the round budget was spent."""


class AprilSession:
    """Old/new preference loop with online Bradley-Terry reward updates.

    Strategies: ``al`` scores candidates with the weighted heuristics,
    ``random`` picks uniformly, ``gibbs`` presents fresh pairs sampled from
    the pair softmax of the blended utility and applies the policy-gradient
    update instead of the Bradley-Terry one.
    """

    def __init__(
        self,
        db: SummaryDB,
        model: UtilityModel,
        *,
        strategy: Strategy = Strategy.AL,
        weights: QueryWeights | None = None,
        n_rounds: int = 10,
        bt_learning_rate: float = 2.0,
        gibbs_learning_rate: float = 2.0,
        seed: int = 0,
        source: Source = Source.HUMAN,
    ) -> None:
        if strategy is Strategy.JN:
            raise NotImplementedError("the J&N strategy is reserved but not implemented")
        self.db = db
        self.model = model
        self.strategy = Strategy(strategy)
        self.weights = weights or QueryWeights()
        self.n_rounds = int(n_rounds)
        self.bt_learning_rate = float(bt_learning_rate)
        self.gibbs_learning_rate = float(gibbs_learning_rate)
        self.rng = np.random.default_rng(seed)
        self.source = source
        self.state = QueryState()
        self.records: list[PreferenceRecord] = []
        self.selection_ms: list[float] = []
        self._pair: tuple[int, int] | None = None
        if self.n_rounds > 0:
            self._pair = self._select_pair()

    @property
    def round(self) -> int:
        return len(self.records) + 1

    @property
    def finished(self) -> bool:
        return len(self.records) >= self.n_rounds

    @property
    def shown_ids(self) -> set[int]:
        return set(self.state.shown)

    def current_pair(self) -> tuple[int, int] | None:
        return self._pair

    def _pick_new(self) -> int:
        if self.strategy is Strategy.RANDOM:
            return random_select(self.db, self.state, self.rng)
        return select_next(self.db, self.state, self.model, self.weights)

    def _select_pair(self) -> tuple[int, int]:
        start = time.perf_counter()
        if self.strategy is Strategy.GIBBS:
            utilities = self.model.blended_over_db(self.db)
            left, right = gibbs_sample_pair(utilities, self.rng)
            self.state.mark_shown(left)
            self.state.mark_shown(right)
        else:
            if self.state.old_id is None:
                left = self._pick_new()
                self.state.mark_shown(left)
            else:
                left = self.state.old_id
            right = self._pick_new()
            self.state.mark_shown(right)
        self.selection_ms.append((time.perf_counter() - start) * 1e3)
        return left, right

    def submit(self, direction: Direction) -> PreferenceRecord:
        if self.finished or self._pair is None:
            raise SessionFinished("round budget already spent")
        left, right = self._pair
        record = PreferenceRecord(
            round=self.round,
            left_id=left,
            right_id=right,
            direction=Direction(direction),
            source=self.source,
        )
        self.records.append(record)
        if self.strategy is Strategy.GIBBS:
            # policy-gradient step on the pair softmax; the posterior weights
            # reach the blended utility through the beta factor
            if record.direction is Direction.LEFT:
                utilities = self.model.blended_over_db(self.db)
                grad = pair_log_policy_gradient(utilities, self.db.feature_matrix, (left, right))
                self.model.w += self.gibbs_learning_rate * self.model.beta * grad
        else:
            bt_update(self.model, record, self.db, self.bt_learning_rate)
            self.state.old_id = right
        self.state.round = len(self.records)
        self._pair = self._select_pair() if not self.finished else None
        return record


class SppiSession:
    """Gibbs pair loop on the pure posterior with policy-gradient updates."""

    def __init__(
        self,
        db: SummaryDB,
        *,
        n_rounds: int = 10,
        gamma: float = 1e-3,
        seed: int = 0,
        source: Source = Source.HUMAN,
    ) -> None:
        self.db = db
        self.n_rounds = int(n_rounds)
        self.model = SppiModel(w=np.zeros(db.feature_matrix.shape[1]), gamma=gamma)
        self.rng = np.random.default_rng(seed)
        self.source = source
        self.records: list[PreferenceRecord] = []
        self.selection_ms: list[float] = []
        self.state = QueryState()
        self._pair: tuple[int, int] | None = None
        if self.n_rounds > 0:
            self._pair = self._select_pair()

    @property
    def round(self) -> int:
        return len(self.records) + 1

    @property
    def finished(self) -> bool:
        return len(self.records) >= self.n_rounds

    @property
    def shown_ids(self) -> set[int]:
        return set(self.state.shown)

    def current_pair(self) -> tuple[int, int] | None:
        return self._pair

    def _select_pair(self) -> tuple[int, int]:
        start = time.perf_counter()
        utilities = self.db.feature_matrix @ self.model.w
        left, right = gibbs_sample_pair(utilities, self.rng)
        self.state.mark_shown(left)
        self.state.mark_shown(right)
        self.selection_ms.append((time.perf_counter() - start) * 1e3)
        return left, right

    def submit(self, direction: Direction) -> PreferenceRecord:
        if self.finished or self._pair is None:
            raise SessionFinished("round budget already spent")
        left, right = self._pair
        record = PreferenceRecord(
            round=self.round,
            left_id=left,
            right_id=right,
            direction=Direction(direction),
            source=self.source,
        )
        self.records.append(record)
        if record.direction is Direction.LEFT:
            utilities = self.db.feature_matrix @ self.model.w
            grad = pair_log_policy_gradient(utilities, self.db.feature_matrix, (left, right))
            self.model.w += self.model.gamma * grad
        self.state.round = len(self.records)
        self._pair = self._select_pair() if not self.finished else None
        return record

    def best_summary(self):
        best = int(np.argmax(self.db.feature_matrix @ self.model.w))
        return self.db[best]


def drive_with_oracle(session, oracle) -> None:
    """Run a session to completion against a summary-pair oracle."""
    while not session.finished:
        left, right = session.current_pair()
        session.submit(oracle.prefer(session.db[left], session.db[right]))


def replay_directions(session, directions) -> None:
    """Feed a recorded direction sequence into a fresh session."""
    directions = list(directions)
    if len(directions) != session.n_rounds:
        raise ValueError("direction count must equal the session's round budget")
    for direction in directions:
        session.submit(Direction(direction))
