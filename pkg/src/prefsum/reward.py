"""Reward estimation from pairwise preferences.

A summary's estimated utility blends a reference-free heuristic prior with a
linear posterior learnt online from preference feedback:

    utility(y) = (1 - beta) * prior(y) + beta * w . features(y)

The prior covers coverage/redundancy/length structure; the posterior is fitted
by per-record gradient ascent on the Bradley-Terry log-likelihood.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DocumentCluster, FeatureSpace, featurize
from .mathutil import sigmoid
from .summary_db import Summary, SummaryDB

log = logging.getLogger(__name__)

UTILITY_SCALE = 10.0

PREFDB_MAGIC = "PREFDB"
PREFDB_VERSION = 1


class Direction(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Source(enum.Enum):
    HUMAN = "human"
    LNO = "lno"
    PERFECT = "perfect"


@dataclass(frozen=True)
class PreferenceRecord:
    round: int
    left_id: int
    right_id: int
    direction: Direction
    source: Source


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class HeuristicConfig:
    redundancy_weight: float = 0.1
    overlength_weight: float = 10.0


class HeuristicPrior:
    """Coverage-minus-redundancy heuristic, rescaled to [0, 10] over a pool.

    raw(y) = cos(features(y), cluster centroid)
             - redundancy_weight * max pairwise sentence cosine within y
             - overlength_weight * tokens over the length limit
    """

    def __init__(
        self,
        cluster: DocumentCluster,
        space: FeatureSpace,
        config: HeuristicConfig = HeuristicConfig(),
    ) -> None:
        self.cluster = cluster
        self.space = space
        self.config = config
        self._sentence_features = np.vstack(
            [featurize([i], cluster, space) for i in range(len(cluster.sentences))]
        )
        self._centroid = self._sentence_features.mean(axis=0)
        self._scale: tuple[float, float] | None = None
        self._pool_cache: tuple[int, np.ndarray] | None = None

    def raw(self, summary: Summary) -> float:
        coverage = _cosine(summary.features, self._centroid)
        redundancy = 0.0
        if len(summary.sentence_ids) > 1:
            rows = self._sentence_features[list(summary.sentence_ids)]
            gram = rows @ rows.T
            norms = np.linalg.norm(rows, axis=1)
            denom = np.outer(norms, norms)
            with np.errstate(invalid="ignore", divide="ignore"):
                cosines = np.where(denom > 0.0, gram / denom, 0.0)
            np.fill_diagonal(cosines, -np.inf)
            redundancy = float(cosines.max())
        over = max(0, summary.token_count - self.cluster.length_limit)
        return (
            coverage
            - self.config.redundancy_weight * redundancy
            - self.config.overlength_weight * over
        )

    def fit(self, db: SummaryDB) -> None:
        """Fit the affine map taking raw pool values onto [0, 10]."""
        raw = np.array([self.raw(s) for s in db.summaries])
        lo, hi = float(raw.min()), float(raw.max())
        if hi > lo:
            a = UTILITY_SCALE / (hi - lo)
            b = -a * lo
        else:
            a, b = 1.0, UTILITY_SCALE / 2.0 - lo
        self._scale = (a, b)
        self._pool_cache = (id(db), np.clip(a * raw + b, 0.0, UTILITY_SCALE))

    def value(self, summary: Summary) -> float:
        if self._scale is None:
            raise RuntimeError("prior not fitted; call fit(db) first")
        a, b = self._scale
        return float(np.clip(a * self.raw(summary) + b, 0.0, UTILITY_SCALE))

    def values_over_db(self, db: SummaryDB) -> np.ndarray:
        if self._pool_cache is not None and self._pool_cache[0] == id(db):
            return self._pool_cache[1]
        values = np.array([self.value(s) for s in db.summaries])
        self._pool_cache = (id(db), values)
        return values


def bt_probability(u_i: float, u_j: float) -> float:
    """Bradley-Terry probability that the first utility's summary is preferred."""
    return sigmoid(float(u_i) - float(u_j))


class UtilityModel:
    """Blended prior/posterior utility with an optional output rescale."""

    def __init__(self, prior: HeuristicPrior, beta: float, dim: int) -> None:
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        self.prior = prior
        self.beta = float(beta)
        self.w = np.zeros(dim)
        self.output_scale: tuple[float, float] | None = None

    def blended(self, summary: Summary) -> float:
        posterior = float(self.w @ summary.features)
        if self.beta == 0.0:
            return self.prior.value(summary)
        if self.beta == 1.0:
            return posterior
        return (1.0 - self.beta) * self.prior.value(summary) + self.beta * posterior

    def blended_over_db(self, db: SummaryDB) -> np.ndarray:
        posterior = db.feature_matrix @ self.w
        if self.beta == 1.0:
            return posterior
        return (1.0 - self.beta) * self.prior.values_over_db(db) + self.beta * posterior

    def fit_output_scale(self, db: SummaryDB) -> None:
        """Fit the strictly increasing affine map taking pool utilities onto [0, 10]."""
        blended = self.blended_over_db(db)
        lo, hi = float(blended.min()), float(blended.max())
        if hi > lo:
            a = UTILITY_SCALE / (hi - lo)
            b = -a * lo
        else:
            a, b = 1.0, UTILITY_SCALE / 2.0 - lo
        self.output_scale = (a, b)

    def normalized(self, summary: Summary) -> float:
        if self.output_scale is None:
            raise RuntimeError("output scale not fitted; call fit_output_scale(db)")
        a, b = self.output_scale
        return a * self.blended(summary) + b

    def normalized_over_db(self, db: SummaryDB) -> np.ndarray:
        blended = self.blended_over_db(db)
        lo, hi = float(blended.min()), float(blended.max())
        if hi > lo:
            return (blended - lo) * (UTILITY_SCALE / (hi - lo))
        return np.full(len(blended), UTILITY_SCALE / 2.0)


def bt_update(model: UtilityModel, record: PreferenceRecord, db: SummaryDB, alpha: float) -> UtilityModel:
    """One gradient-ascent step on the record's Bradley-Terry log-likelihood.

    The posterior weight enters the blended utility through the beta factor,
    so the gradient carries it:  w += alpha * (1 - P(win)) * beta * dphi.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    n = len(db)
    if not (0 <= record.left_id < n and 0 <= record.right_id < n):
        raise KeyError(f"unknown summary ids {record.left_id}, {record.right_id}")
    if record.direction is Direction.LEFT:
        winner, loser = db[record.left_id], db[record.right_id]
    else:
        winner, loser = db[record.right_id], db[record.left_id]
    p_win = bt_probability(model.blended(winner), model.blended(loser))
    delta = winner.features - loser.features
    model.w += alpha * (1.0 - p_win) * model.beta * delta
    return model


def induced_ranking(model: UtilityModel, db: SummaryDB) -> np.ndarray:
    """Rank of each pool summary under the blended utility.

    rank(y) counts pool summaries with strictly lower utility; ties are broken
    by summary id so the result is a permutation of 0..len(db)-1.
    """
    if len(db) == 0:
        raise ValueError("empty pool")
    utilities = model.blended_over_db(db)
    order = np.lexsort((np.arange(len(db)), utilities))
    ranks = np.empty(len(db), dtype=int)
    ranks[order] = np.arange(len(db))
    return ranks


def save_preferences(records, path: str | Path, cluster_id: str, db_checksum: str) -> None:
    lines = [
        f"{PREFDB_MAGIC}\t{PREFDB_VERSION}",
        f"cluster\t{cluster_id}",
        f"db_sha\t{db_checksum}",
    ]
    for r in records:
        lines.append(f"{r.round}\t{r.left_id}\t{r.right_id}\t{r.direction.value}\t{r.source.value}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def load_preferences(path: str | Path) -> tuple[str, str, list[PreferenceRecord]]:
    lines = Path(path).read_bytes().decode("utf-8").splitlines()
    if not lines or lines[0] != f"{PREFDB_MAGIC}\t{PREFDB_VERSION}":
        raise ValueError("bad preference file magic or version")
    cluster_id = lines[1].split("\t")[1]
    db_checksum = lines[2].split("\t")[1]
    records = []
    for line in lines[3:]:
        if not line:
            continue
        rnd, left, right, direction, source = line.split("\t")
        records.append(
            PreferenceRecord(
                round=int(rnd),
                left_id=int(left),
                right_id=int(right),
                direction=Direction(direction),
                source=Source(source),
            )
        )
    return cluster_id, db_checksum, records


def preferences_checksum(records) -> str:
    h = hashlib.sha256()
    for r in records:
        h.update(f"{r.round}|{r.left_id}|{r.right_id}|{r.direction.value}|{r.source.value}".encode())
    return h.hexdigest()
