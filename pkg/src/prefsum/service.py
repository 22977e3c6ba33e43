"""HTTP service hosting live preference sessions.

Endpoints: ``POST /sessions``, ``GET /sessions/{id}/pair``,
``POST /sessions/{id}/preference``, ``GET /sessions/{id}/result`` and
``GET /healthz``.  Each session is an append-only event log on disk plus an
in-memory interactive session; after the final preference the value-search
stage runs on a bounded worker pool while clients poll for the result.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from .config import child_seed
from .corpus import DocumentCluster, build_feature_space, load_cluster
from .harness import heuristic_baseline_summary, rl_config_from, ClusterAssets
from .config import ExperimentConfig
from .metrics import gold_utility, summary_tokens
from .querier import Strategy
from .reward import Direction, HeuristicPrior, Source, UtilityModel, induced_ranking
from .rl import derive_policy, scaled_rank_reward
from .harness import train_value_model
from .sessions import AprilSession, SppiSession
from .summary_db import generate_db, load_db, persist_db

log = logging.getLogger(__name__)

BACKGROUND_TOKENS = 200


@dataclass
class ServiceSettings:
    corpus_root: Path
    sessions_dir: Path
    db_cache_dir: Path | None = None
    port: int = 8000
    rl: str = "td"
    episodes: int = 3000
    db_size: int = 5000
    feature_dim: int = 200
    db_seed: int = 0
    blind_mode: bool = True
    workers: int = max(1, (os.cpu_count() or 2) - 1)
    pref_learning_rate: float = 2.0
    sppi_learning_rate: float = 1e-3
    beta: float = 0.5

    @classmethod
    def from_env(cls, **overrides) -> "ServiceSettings":
        env = os.environ
        values = {
            "corpus_root": Path(env.get("PREFSUM_CORPUS_ROOT", "sample_corpus")),
            "sessions_dir": Path(env.get("PREFSUM_SESSIONS_DIR", "sessions")),
            "db_cache_dir": Path(env["PREFSUM_DB_CACHE"]) if "PREFSUM_DB_CACHE" in env else None,
            "port": int(env.get("PREFSUM_PORT", "8000")),
        }
        for key, value in overrides.items():
            if value is not None:
                values[key] = value
        return cls(**values)


class CreateSessionRequest(BaseModel):
    cluster_id: str
    system: str = Field(pattern="^(april|sppi)$")
    n_rounds: int = 10
    beta: float | None = None
    seed: int | None = None


class PreferenceRequest(BaseModel):
    round: int
    chosen: str = Field(pattern="^(left|right)$")


class ResultAck(BaseModel):
    final_preference: str | None = Field(default=None, pattern="^(A|B)$")
    assignment: dict[str, str] | None = None
    ratings: dict[str, int] | None = None


@dataclass
class LiveSession:
    id: str
    cluster_id: str
    system: str
    n_rounds: int
    seed: int
    beta: float
    session: object
    status: str = "awaiting_preference"
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    responses: dict[int, dict] = field(default_factory=dict)
    result: dict | None = None
    error: str | None = None


class SessionStore:
    """In-memory registry backed by per-session JSONL event logs."""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, LiveSession] = {}
        self._lock = threading.Lock()

    def add(self, live: LiveSession) -> None:
        with self._lock:
            self._sessions[live.id] = live

    def get(self, session_id: str) -> LiveSession:
        with self._lock:
            live = self._sessions.get(session_id)
        if live is None:
            raise HTTPException(status_code=404, detail={"code": "unknown_session"})
        return live

    def log_event(self, session_id: str, event: dict) -> None:
        path = self.directory / f"{session_id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def events(self, session_id: str) -> list[dict]:
        path = self.directory / f"{session_id}.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


class ClusterCache:
    """Loads clusters and candidate pools once, optionally persisting pools."""

    def __init__(self, settings: ServiceSettings) -> None:
        self.settings = settings
        self._lock = threading.Lock()
        self._assets: dict[str, ClusterAssets] = {}

    def cluster_ids(self) -> list[str]:
        root = self.settings.corpus_root
        if not root.is_dir():
            return []
        return sorted(p.name for p in root.iterdir() if (p / "docs").is_dir())

    def get(self, cluster_id: str) -> ClusterAssets:
        with self._lock:
            if cluster_id in self._assets:
                return self._assets[cluster_id]
        path = self.settings.corpus_root / cluster_id
        if not (path / "docs").is_dir():
            raise HTTPException(status_code=404, detail={"code": "unknown_cluster"})
        cluster = load_cluster(path)
        space = build_feature_space(cluster, dim=self.settings.feature_dim)
        db = self._load_or_generate_db(cluster, space)
        prior = HeuristicPrior(cluster, space)
        prior.fit(db)
        assets = ClusterAssets(cluster=cluster, space=space, db=db, prior=prior, ustar=None)
        with self._lock:
            self._assets[cluster_id] = assets
        return assets

    def _load_or_generate_db(self, cluster: DocumentCluster, space):
        cache_dir = self.settings.db_cache_dir
        if cache_dir is not None:
            cache_dir.mkdir(parents=True, exist_ok=True)
            cached = cache_dir / f"{cluster.id}-{self.settings.db_size}-{self.settings.db_seed}.db"
            if cached.exists():
                try:
                    return load_db(cached, cluster, space)
                except Exception:
                    log.warning("pool cache for %s invalid, regenerating", cluster.id)
        db = generate_db(
            cluster, space, size=self.settings.db_size,
            seed=child_seed(self.settings.db_seed, "service-db", cluster.id),
        )
        if cache_dir is not None:
            persist_db(db, cache_dir / f"{cluster.id}-{self.settings.db_size}-{self.settings.db_seed}.db")
        return db


def _summary_payload(summary, cluster: DocumentCluster) -> dict:
    return {
        "id": summary.id,
        "sentences": [cluster.sentences[i].text for i in summary.sentence_ids],
        "token_count": summary.token_count,
    }


def _background_payload(cluster: DocumentCluster) -> list[str]:
    # leading document text stands in for topic background abstracts;
    # references stay server-side
    docs: dict[str, list[str]] = {}
    for sentence in cluster.sentences:
        docs.setdefault(sentence.doc_id, []).append(sentence.text)
    out = []
    for doc_id in sorted(docs)[:2]:
        text, count = [], 0
        for sent in docs[doc_id]:
            text.append(sent)
            count += len(sent.split())
            if count >= BACKGROUND_TOKENS:
                break
        out.append(" ".join(text))
    return out


def create_app(settings: ServiceSettings) -> FastAPI:
    app = FastAPI(title="prefsum preference sessions")
    store = SessionStore(settings.sessions_dir)
    cache = ClusterCache(settings)
    executor = ThreadPoolExecutor(max_workers=settings.workers)
    app.state.settings = settings
    app.state.store = store

    def pair_payload(live: LiveSession) -> dict:
        assets = cache.get(live.cluster_id)
        pair = live.session.current_pair()
        if pair is None:
            return {"status": live.status}
        left, right = pair
        return {
            "status": live.status,
            "round": live.session.round,
            "n_rounds": live.n_rounds,
            "left": _summary_payload(assets.db[left], assets.cluster),
            "right": _summary_payload(assets.db[right], assets.cluster),
        }

    def finish_training(live: LiveSession) -> None:
        try:
            assets = cache.get(live.cluster_id)
            config = ExperimentConfig(
                beta=live.beta,
                rl=settings.rl,
                episodes=settings.episodes,
                db_size=settings.db_size,
                feature_dim=settings.feature_dim,
                pref_learning_rate=settings.pref_learning_rate,
                sppi_learning_rate=settings.sppi_learning_rate,
                seed=live.seed,
            )
            rl_cfg = rl_config_from(config)
            if live.system == "sppi":
                final = live.session.best_summary()
            else:
                model = live.session.model
                model.fit_output_scale(assets.db)
                ranks = induced_ranking(model, assets.db)
                rewards = scaled_rank_reward(ranks, len(assets.db))
                value_model = train_value_model(
                    settings.rl, assets, rewards, rl_cfg, child_seed(live.seed, "rl")
                )
                final = derive_policy(value_model, assets.cluster, assets.space, mode="greedy")
            baseline = heuristic_baseline_summary(assets, config, episodes=settings.episodes)
            result = {
                "with_interaction": _summary_payload(final, assets.cluster),
                "no_interaction": _summary_payload(baseline, assets.cluster),
            }
            if not settings.blind_mode and assets.cluster.has_references:
                result["with_interaction"]["gold_utility"] = gold_utility(
                    summary_tokens(final, assets.cluster), assets.cluster.references
                )
                result["no_interaction"]["gold_utility"] = gold_utility(
                    summary_tokens(baseline, assets.cluster), assets.cluster.references
                )
            with live.lock:
                live.result = result
                live.status = "done"
            store.log_event(live.id, {"type": "training_completed", "user_action": False})
        except Exception as exc:  # surfaced to get_result callers
            log.exception("training failed for session %s", live.id)
            with live.lock:
                live.error = str(exc)
                live.status = "failed"

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "clusters": cache.cluster_ids()}

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest):
        assets = cache.get(request.cluster_id)
        seed = request.seed if request.seed is not None else int.from_bytes(os.urandom(4), "little")
        beta = request.beta if request.beta is not None else settings.beta
        if request.n_rounds < 1:
            raise HTTPException(status_code=422, detail={"code": "invalid_budget"})
        if request.system == "sppi":
            session = SppiSession(
                assets.db,
                n_rounds=request.n_rounds,
                gamma=settings.sppi_learning_rate,
                seed=child_seed(seed, "query"),
                source=Source.HUMAN,
            )
        else:
            model = UtilityModel(assets.prior, beta=beta, dim=assets.space.dim)
            session = AprilSession(
                assets.db,
                model,
                strategy=Strategy.AL,
                weights=None,
                n_rounds=request.n_rounds,
                bt_learning_rate=settings.pref_learning_rate,
                gibbs_learning_rate=settings.pref_learning_rate,
                seed=child_seed(seed, "query"),
                source=Source.HUMAN,
            )
        live = LiveSession(
            id=uuid.uuid4().hex,
            cluster_id=request.cluster_id,
            system=request.system,
            n_rounds=request.n_rounds,
            seed=seed,
            beta=beta,
            session=session,
        )
        store.add(live)
        store.log_event(
            live.id,
            {
                "type": "created",
                "user_action": True,
                "cluster_id": request.cluster_id,
                "system": request.system,
                "n_rounds": request.n_rounds,
                "seed": seed,
                "beta": beta,
            },
        )
        payload = pair_payload(live)
        payload["session_id"] = live.id
        payload["background"] = _background_payload(assets.cluster)
        return payload

    @app.get("/sessions/{session_id}/pair")
    def get_pair(session_id: str):
        live = store.get(session_id)
        with live.lock:
            return pair_payload(live)

    @app.post("/sessions/{session_id}/preference")
    def post_preference(session_id: str, request: PreferenceRequest):
        live = store.get(session_id)
        with live.lock:
            if request.round in live.responses:
                recorded = live.responses[request.round]
                if recorded["chosen"] == request.chosen:
                    return recorded["response"]
                raise HTTPException(
                    status_code=409,
                    detail={"code": "preference_conflict", "recorded": recorded["chosen"]},
                )
            if live.status != "awaiting_preference":
                raise HTTPException(status_code=409, detail={"code": "not_awaiting"})
            if request.round != live.session.round:
                raise HTTPException(
                    status_code=409,
                    detail={"code": "round_mismatch", "expected": live.session.round},
                )
            direction = Direction(request.chosen)
            record = live.session.submit(direction)
            store.log_event(
                live.id,
                {
                    "type": "preference",
                    "user_action": True,
                    "round": record.round,
                    "left": record.left_id,
                    "right": record.right_id,
                    "chosen": request.chosen,
                },
            )
            if live.session.finished:
                live.status = "training"
                store.log_event(live.id, {"type": "training_started", "user_action": False})
                response = {"status": "training"}
                executor.submit(finish_training, live)
            else:
                response = pair_payload(live)
            live.responses[request.round] = {"chosen": request.chosen, "response": response}
            return response

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        live = store.get(session_id)
        with live.lock:
            if live.status == "failed":
                raise HTTPException(status_code=500, detail={"code": "training_failed", "message": live.error})
            if live.status != "done":
                return JSONResponse(
                    status_code=202,
                    content={"status": live.status, "retry_after_s": 2},
                    headers={"Retry-After": "2"},
                )
            return {"status": "done", **live.result}

    @app.post("/sessions/{session_id}/result")
    def ack_result(session_id: str, ack: ResultAck):
        live = store.get(session_id)
        with live.lock:
            if live.status != "done":
                raise HTTPException(status_code=409, detail={"code": "not_done"})
        store.log_event(
            live.id,
            {
                "type": "final_judgement",
                "user_action": True,
                "final_preference": ack.final_preference,
                "assignment": ack.assignment,
                "ratings": ack.ratings,
            },
        )
        return {"status": "recorded"}

    frontend_dist = Path(__file__).resolve().parents[2] / "frontend"
    index = frontend_dist / "index.html"
    if index.exists():
        from fastapi.staticfiles import StaticFiles

        @app.get("/")
        def root():
            return FileResponse(index)

        app.mount("/static", StaticFiles(directory=frontend_dist), name="static")

    return app
