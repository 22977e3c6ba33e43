"""Loose wall-clock guards: query latency on a full-size pool, trainer budgets.

The targets come from the interactive-responsiveness requirements (sub-second
query selection on a 5000-candidate pool; minutes-scale training) and are
asserted with generous slack so slow CI machines still pass.
"""

import time

import numpy as np
import pytest

from prefsum.config import ExperimentConfig, child_seed
from prefsum.corpus import build_feature_space
from prefsum.querier import QueryState, QueryWeights, Strategy, density_scores
from prefsum.reward import HeuristicPrior, Source, UtilityModel
from prefsum.rl import RlConfig, train_ntd, train_td
from prefsum.sessions import AprilSession
from prefsum.summary_db import generate_db
from prefsum.synthetic import synthetic_cluster

QUERY_BUDGET_S = 1.0  # 500 ms target, 2x slack
TD_BUDGET_S = 60.0  # ~30 s target, 2x slack
NTD_BUDGET_S = 300.0  # ~2 min target, 2x+ slack


@pytest.fixture(scope="module")
def full_size_pool():
    cluster = synthetic_cluster("timing", seed=child_seed(5, "timing"), n_sentences=40)
    space = build_feature_space(cluster, dim=200)
    db = generate_db(cluster, space, size=5000, seed=1)
    prior = HeuristicPrior(cluster, space)
    prior.fit(db)
    return cluster, space, db, prior


def test_query_selection_under_budget_on_full_pool(full_size_pool):
    cluster, space, db, prior = full_size_pool
    density_scores(db)  # one-off cache shared by every round
    model = UtilityModel(prior, beta=0.5, dim=space.dim)
    session = AprilSession(
        db, model, strategy=Strategy.AL, weights=QueryWeights(),
        n_rounds=10, seed=3, source=Source.LNO,
    )
    rng = np.random.default_rng(0)
    while not session.finished:
        session.submit("left" if rng.random() < 0.5 else "right")
    worst_ms = max(session.selection_ms)
    assert worst_ms <= QUERY_BUDGET_S * 1e3, f"query selection took {worst_ms:.0f} ms"


def test_training_budgets_at_desk_scale():
    cluster = synthetic_cluster("timing-rl", seed=child_seed(6, "timing"), n_sentences=30)
    space = build_feature_space(cluster, dim=64)
    db = generate_db(cluster, space, size=300, seed=2)
    rewards = np.linspace(0, 10, len(db))

    start = time.perf_counter()
    train_td(cluster, space, db, rewards, RlConfig(episodes=3000, learning_rate=0.05), seed=0)
    td_s = time.perf_counter() - start
    assert td_s <= TD_BUDGET_S, f"TD training took {td_s:.1f} s"

    start = time.perf_counter()
    train_ntd(cluster, space, db, rewards, RlConfig(episodes=3000), seed=0)
    ntd_s = time.perf_counter() - start
    assert ntd_s <= NTD_BUDGET_S, f"NTD training took {ntd_s:.1f} s"
