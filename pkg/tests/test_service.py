import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from prefsum.service import ServiceSettings, create_app

SAMPLE_CORPUS = Path(__file__).resolve().parents[1] / "sample_corpus"


@pytest.fixture
def settings(tmp_path):
    return ServiceSettings(
        corpus_root=SAMPLE_CORPUS,
        sessions_dir=tmp_path / "sessions",
        db_cache_dir=tmp_path / "dbcache",
        rl="td",
        episodes=150,
        db_size=120,
        feature_dim=64,
        db_seed=7,
        workers=2,
    )


@pytest.fixture
def client(settings):
    with TestClient(create_app(settings)) as c:
        yield c


def wait_for_result(client, session_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        response = client.get(f"/sessions/{session_id}/result")
        if response.status_code == 200:
            return response.json()
        assert response.status_code == 202
        time.sleep(0.2)
    raise AssertionError("training did not finish in time")


def run_session(client, n_rounds=3, system="april", seed=11, chooser=None):
    response = client.post(
        "/sessions",
        json={"cluster_id": "comet-watch", "system": system, "n_rounds": n_rounds, "seed": seed},
    )
    assert response.status_code == 200
    payload = response.json()
    session_id = payload["session_id"]
    directions = []
    while payload.get("status") == "awaiting_preference":
        round_index = payload["round"]
        chosen = chooser(payload) if chooser else ("left" if round_index % 2 else "right")
        directions.append(chosen)
        response = client.post(
            f"/sessions/{session_id}/preference", json={"round": round_index, "chosen": chosen}
        )
        assert response.status_code == 200
        payload = response.json()
    return session_id, directions


class TestEndpoints:
    def test_healthz_lists_clusters(self, client):
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert "comet-watch" in body["clusters"]

    def test_create_session_payload(self, client):
        response = client.post(
            "/sessions",
            json={"cluster_id": "comet-watch", "system": "april", "n_rounds": 10, "seed": 3},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["round"] == 1
        assert body["n_rounds"] == 10
        assert body["left"]["sentences"] != body["right"]["sentences"]
        assert body["background"]

    def test_unknown_cluster_is_404_with_code(self, client):
        response = client.post(
            "/sessions", json={"cluster_id": "nope", "system": "april", "n_rounds": 5}
        )
        assert response.status_code == 404
        assert response.json()["detail"]["code"] == "unknown_cluster"

    def test_same_seed_same_first_pair(self, client):
        bodies = [
            client.post(
                "/sessions",
                json={"cluster_id": "comet-watch", "system": "april", "n_rounds": 5, "seed": 99},
            ).json()
            for _ in range(2)
        ]
        assert bodies[0]["left"]["id"] == bodies[1]["left"]["id"]
        assert bodies[0]["right"]["id"] == bodies[1]["right"]["id"]

    def test_round_flow_and_budget(self, client, settings):
        session_id, _ = run_session(client, n_rounds=4, seed=5)
        events = [
            json.loads(line)
            for line in (settings.sessions_dir / f"{session_id}.jsonl").read_text().splitlines()
        ]
        prefs = [e for e in events if e["type"] == "preference"]
        assert len(prefs) == 4
        shown = set()
        for e in prefs:
            shown.update((e["left"], e["right"]))
        assert len(shown) == 5  # old/new protocol shows n_rounds + 1 summaries

    def test_double_submit_is_idempotent(self, client):
        response = client.post(
            "/sessions",
            json={"cluster_id": "comet-watch", "system": "april", "n_rounds": 3, "seed": 1},
        )
        body = response.json()
        sid = body["session_id"]
        first = client.post(f"/sessions/{sid}/preference", json={"round": 1, "chosen": "left"})
        replay = client.post(f"/sessions/{sid}/preference", json={"round": 1, "chosen": "left"})
        assert replay.status_code == 200
        assert replay.json() == first.json()
        conflict = client.post(f"/sessions/{sid}/preference", json={"round": 1, "chosen": "right"})
        assert conflict.status_code == 409
        assert conflict.json()["detail"]["recorded"] == "left"

    def test_result_before_done_is_retry(self, client):
        response = client.post(
            "/sessions",
            json={"cluster_id": "comet-watch", "system": "april", "n_rounds": 3, "seed": 2},
        )
        sid = response.json()["session_id"]
        pending = client.get(f"/sessions/{sid}/result")
        assert pending.status_code == 202
        assert "Retry-After" in pending.headers

    def test_full_april_session_result(self, client):
        sid, _ = run_session(client, n_rounds=3, seed=21)
        result = wait_for_result(client, sid)
        assert result["status"] == "done"
        for key in ("with_interaction", "no_interaction"):
            assert result[key]["sentences"]
            assert result[key]["token_count"] <= 40
            # blind mode: no gold utilities in the payload
            assert "gold_utility" not in result[key]
        ack = client.post(
            f"/sessions/{sid}/result",
            json={"final_preference": "A", "assignment": {"A": "with_interaction", "B": "no_interaction"}},
        )
        assert ack.status_code == 200

    def test_sppi_session(self, client):
        sid, _ = run_session(client, n_rounds=3, system="sppi", seed=8)
        result = wait_for_result(client, sid)
        assert result["status"] == "done"

    def test_replay_matches_offline_pipeline(self, client, settings):
        # the service session and an offline replay of the same preference
        # sequence and seeds must emit the identical final summary
        sid, directions = run_session(client, n_rounds=3, seed=77)
        result = wait_for_result(client, sid)

        from prefsum.config import ExperimentConfig, child_seed
        from prefsum.corpus import build_feature_space, load_cluster
        from prefsum.harness import rl_config_from, train_value_model, ClusterAssets
        from prefsum.querier import Strategy
        from prefsum.reward import HeuristicPrior, Source, UtilityModel, induced_ranking
        from prefsum.rl import derive_policy, scaled_rank_reward
        from prefsum.sessions import AprilSession, replay_directions
        from prefsum.summary_db import generate_db

        cluster = load_cluster(SAMPLE_CORPUS / "comet-watch")
        space = build_feature_space(cluster, dim=settings.feature_dim)
        db = generate_db(
            cluster, space, size=settings.db_size,
            seed=child_seed(settings.db_seed, "service-db", cluster.id),
        )
        prior = HeuristicPrior(cluster, space)
        prior.fit(db)
        model = UtilityModel(prior, beta=settings.beta, dim=space.dim)
        session = AprilSession(
            db, model, strategy=Strategy.AL, n_rounds=3,
            bt_learning_rate=settings.pref_learning_rate,
            gibbs_learning_rate=settings.pref_learning_rate,
            seed=child_seed(77, "query"), source=Source.HUMAN,
        )
        replay_directions(session, directions)
        model.fit_output_scale(db)
        ranks = induced_ranking(model, db)
        rewards = scaled_rank_reward(ranks, len(db))
        config = ExperimentConfig(
            beta=settings.beta, rl=settings.rl, episodes=settings.episodes,
            db_size=settings.db_size, feature_dim=settings.feature_dim, seed=77,
        )
        assets = ClusterAssets(cluster=cluster, space=space, db=db, prior=prior, ustar=None)
        value_model = train_value_model(
            settings.rl, assets, rewards, rl_config_from(config), child_seed(77, "rl")
        )
        offline = derive_policy(value_model, cluster, space, mode="greedy")
        offline_sentences = [cluster.sentences[i].text for i in offline.sentence_ids]
        assert result["with_interaction"]["sentences"] == offline_sentences

    def test_session_recoverable_from_event_log(self, client, settings):
        # replaying the logged preferences through a fresh session yields the
        # same pair sequence the live session served
        response = client.post(
            "/sessions",
            json={"cluster_id": "comet-watch", "system": "april", "n_rounds": 3, "seed": 31},
        )
        body = response.json()
        sid = body["session_id"]
        served_pairs = [(body["left"]["id"], body["right"]["id"])]
        payload = body
        while payload.get("status") == "awaiting_preference":
            response = client.post(
                f"/sessions/{sid}/preference",
                json={"round": payload["round"], "chosen": "left"},
            )
            payload = response.json()
            if payload.get("status") == "awaiting_preference":
                served_pairs.append((payload["left"]["id"], payload["right"]["id"]))

        events = [
            json.loads(line)
            for line in (settings.sessions_dir / f"{sid}.jsonl").read_text().splitlines()
        ]
        created = next(e for e in events if e["type"] == "created")
        prefs = [e for e in events if e["type"] == "preference"]

        from prefsum.config import child_seed
        from prefsum.corpus import build_feature_space, load_cluster
        from prefsum.querier import Strategy
        from prefsum.reward import Direction, HeuristicPrior, Source, UtilityModel
        from prefsum.sessions import AprilSession
        from prefsum.summary_db import generate_db

        cluster = load_cluster(SAMPLE_CORPUS / "comet-watch")
        space = build_feature_space(cluster, dim=settings.feature_dim)
        db = generate_db(
            cluster, space, size=settings.db_size,
            seed=child_seed(settings.db_seed, "service-db", cluster.id),
        )
        prior = HeuristicPrior(cluster, space)
        prior.fit(db)
        model = UtilityModel(prior, beta=created["beta"], dim=space.dim)
        session = AprilSession(
            db, model, strategy=Strategy.AL, n_rounds=created["n_rounds"],
            bt_learning_rate=settings.pref_learning_rate,
            gibbs_learning_rate=settings.pref_learning_rate,
            seed=child_seed(created["seed"], "query"), source=Source.HUMAN,
        )
        replayed = []
        for e in prefs:
            replayed.append(session.current_pair())
            session.submit(Direction(e["chosen"]))
        assert replayed == served_pairs
