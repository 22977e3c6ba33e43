"""Summary search as an episodic MDP solved by value-based RL.

States are draft summaries; actions concatenate a sentence or terminate.  The
reward is delayed: zero while building, the summary's score at termination.
Three trainers approximate the state values from replayed pool summaries:

* ``train_td``   - linear TD(0),
* ``train_lstd`` - least-squares TD with a randomly initialized diagonal system,
* ``train_ntd``  - a two-hidden-layer ReLU network trained with squared TD
  errors, pool softmax replay and a periodically synced target copy.

``derive_policy`` turns learnt values into a summary; ``brute_force_best``
exhaustively verifies small instances.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import DocumentCluster, FeatureSpace, bigram_counts
from .mathutil import softmax
from .summary_db import Summary, SummaryDB, make_summary

log = logging.getLogger(__name__)


class TrainingDiverged(Exception):
    def __init__(self, episode: int, loss: float, grad_norm: float) -> None:
        super().__init__(
            f"non-finite loss at episode {episode}: loss={loss}, grad_norm={grad_norm}"
        )
        self.episode = episode
        self.loss = loss
        self.grad_norm = grad_norm


class Phase(enum.Enum):
    BUILDING = "building"
    TERMINAL = "terminal"
    ABSORBING = "absorbing"


@dataclass(frozen=True)
class MdpState:
    draft: tuple[int, ...]
    token_count: int
    phase: Phase


@dataclass(frozen=True)
class Action:
    sentence_id: int | None = None

    @property
    def is_terminate(self) -> bool:
        return self.sentence_id is None


TERMINATE = Action()


def initial_state() -> MdpState:
    return MdpState(draft=(), token_count=0, phase=Phase.BUILDING)


def legal_actions(state: MdpState, cluster: DocumentCluster) -> list[Action]:
    """Terminate plus one add action per unused sentence.

    Length enforcement happens through the terminal rule after the transition,
    not by restricting the action set.
    """
    if state.phase is not Phase.BUILDING:
        raise ValueError(f"no actions in phase {state.phase.value}")
    used = set(state.draft)
    actions = [TERMINATE]
    actions.extend(Action(i) for i in range(len(cluster.sentences)) if i not in used)
    return actions


def step(state: MdpState, action: Action, cluster: DocumentCluster) -> MdpState:
    if state.phase is not Phase.BUILDING:
        raise ValueError("cannot step from a terminal or absorbing state")
    if action.is_terminate:
        return MdpState(draft=state.draft, token_count=state.token_count, phase=Phase.ABSORBING)
    sid = action.sentence_id
    if sid in state.draft or not 0 <= sid < len(cluster.sentences):
        raise ValueError(f"illegal action: add sentence {sid}")
    draft = state.draft + (sid,)
    count = state.token_count + cluster.sentences[sid].token_count
    phase = Phase.TERMINAL if count > cluster.length_limit else Phase.BUILDING
    return MdpState(draft=draft, token_count=count, phase=phase)


@dataclass(frozen=True)
class Trajectory:
    states: tuple[MdpState, ...]
    actions: tuple[Action, ...]


def rollout(sentence_ids: Sequence[int], cluster: DocumentCluster) -> Trajectory:
    """Replay a summary as the trajectory that builds it and terminates."""
    states = [initial_state()]
    actions: list[Action] = []
    for sid in sentence_ids:
        actions.append(Action(int(sid)))
        states.append(step(states[-1], actions[-1], cluster))
    actions.append(TERMINATE)
    states.append(step(states[-1], TERMINATE, cluster))
    return Trajectory(states=tuple(states), actions=tuple(actions))


def reward_of(trajectory: Trajectory, reward_fn: Callable[[tuple[int, ...]], float]) -> float:
    """Total trajectory reward: zero everywhere except the terminate step."""
    if not trajectory.actions or not trajectory.actions[-1].is_terminate:
        raise ValueError("trajectory does not end with terminate")
    final_draft = trajectory.states[-2].draft
    return float(reward_fn(final_draft))


@dataclass
class RlConfig:
    episodes: int = 3000
    sync_period: int = 50
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 10.0
    hidden_dim: int = 100

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.sync_period < 1 or self.learning_rate <= 0.0:
            raise ValueError("invalid RL configuration")

    def fingerprint(self) -> str:
        payload = "|".join(
            str(v)
            for v in (
                self.episodes, self.sync_period, self.learning_rate,
                self.adam_beta1, self.adam_beta2, self.adam_eps,
                self.grad_clip, self.hidden_dim,
            )
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class LinearValueModel:
    theta: np.ndarray

    def values(self, features: np.ndarray) -> np.ndarray:
        return features @ self.theta


class NeuralValueModel:
    """Two-hidden-layer ReLU value network with explicit Adam state.

    Layers: input -> ReLU(hidden) -> ReLU(hidden) -> scalar.  Weights start
    Glorot-uniform, biases zero.  ``target_params`` is the frozen copy used
    for bootstrap targets and changes only on ``sync_target``.
    """

    PARAM_ORDER = ("W1", "b1", "W2", "b2", "W3", "b3")

    def __init__(self, input_dim: int, hidden_dim: int, seed: int) -> None:
        rng = np.random.default_rng(seed)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim

        def glorot(fan_in, fan_out):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=(fan_in, fan_out))

        self.params = {
            "W1": glorot(input_dim, hidden_dim),
            "b1": np.zeros(hidden_dim),
            "W2": glorot(hidden_dim, hidden_dim),
            "b2": np.zeros(hidden_dim),
            "W3": glorot(hidden_dim, 1),
            "b3": np.zeros(1),
        }
        self.target_params = {k: v.copy() for k, v in self.params.items()}
        self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.adam_t = 0
        self.loss_history: list[float] = []

    @staticmethod
    def _forward(params, x: np.ndarray):
        z1 = x @ params["W1"] + params["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ params["W2"] + params["b2"]
        a2 = np.maximum(z2, 0.0)
        out = (a2 @ params["W3"] + params["b3"]).ravel()
        return out, (x, z1, a1, z2, a2)

    def values(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(features)
        return self._forward(self.params, features)[0]

    def target_values(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(features)
        return self._forward(self.target_params, features)[0]

    def loss_and_grads(self, states: np.ndarray, targets: np.ndarray):
        """Summed squared TD error over the episode's states, with gradients."""
        out, (x, z1, a1, z2, a2) = self._forward(self.params, states)
        diff = out - targets
        loss = float(np.dot(diff, diff))
        d_out = (2.0 * diff)[:, None]
        grads = {
            "W3": a2.T @ d_out,
            "b3": d_out.sum(axis=0),
        }
        d_a2 = d_out @ self.params["W3"].T
        d_z2 = d_a2 * (z2 > 0.0)
        grads["W2"] = a1.T @ d_z2
        grads["b2"] = d_z2.sum(axis=0)
        d_a1 = d_z2 @ self.params["W2"].T
        d_z1 = d_a1 * (z1 > 0.0)
        grads["W1"] = x.T @ d_z1
        grads["b1"] = d_z1.sum(axis=0)
        return loss, grads

    @staticmethod
    def grad_norm(grads) -> float:
        with np.errstate(over="ignore"):
            return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))

    def adam_step(self, grads, config: RlConfig) -> float:
        norm = self.grad_norm(grads)
        scale = config.grad_clip / norm if norm > config.grad_clip else 1.0
        self.adam_t += 1
        b1, b2 = config.adam_beta1, config.adam_beta2
        for key, grad in grads.items():
            g = grad * scale
            self.adam_m[key] = b1 * self.adam_m[key] + (1.0 - b1) * g
            self.adam_v[key] = b2 * self.adam_v[key] + (1.0 - b2) * g * g
            m_hat = self.adam_m[key] / (1.0 - b1**self.adam_t)
            v_hat = self.adam_v[key] / (1.0 - b2**self.adam_t)
            self.params[key] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        return norm

    def sync_target(self) -> None:
        self.target_params = {k: v.copy() for k, v in self.params.items()}

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in self.PARAM_ORDER])

    def set_flat_params(self, flat: np.ndarray) -> None:
        offset = 0
        for key in self.PARAM_ORDER:
            size = self.params[key].size
            self.params[key] = flat[offset : offset + size].reshape(self.params[key].shape).copy()
            offset += size
        if offset != flat.size:
            raise ValueError("parameter vector has the wrong length")


class _PrefixFeatures:
    """Per pool summary: feature rows of the empty draft and every prefix.

    Row i is the L2-normalized bigram-count vector of the first i sentences,
    so row 0 is the zero vector and row k the full summary.
    """

    def __init__(self, db: SummaryDB, cluster: DocumentCluster, space: FeatureSpace) -> None:
        self.db = db
        self.cluster = cluster
        self.space = space
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, summary_id: int) -> np.ndarray:
        rows = self._cache.get(summary_id)
        if rows is None:
            ids = self.db[summary_id].sentence_ids
            mat = np.zeros((len(ids) + 1, self.space.dim))
            counts = np.zeros(self.space.dim)
            for i, sid in enumerate(ids, start=1):
                counts += bigram_counts([sid], self.cluster, self.space)
                norm = np.linalg.norm(counts)
                mat[i] = counts / norm if norm > 0.0 else counts
            rows = mat
            self._cache[summary_id] = rows
        return rows


def _reward_array(db: SummaryDB, reward) -> np.ndarray:
    """Normalize a reward spec (array over pool ids or callable) to an array."""
    if callable(reward):
        return np.array([float(reward(s)) for s in db.summaries])
    arr = np.asarray(reward, dtype=float)
    if arr.shape != (len(db),):
        raise ValueError("reward array must align with the pool")
    return arr


def scaled_rank_reward(ranks: np.ndarray, pool_size: int) -> np.ndarray:
    """Map raw ranks 0..n-1 to [0, 10] so value targets stay comparable across pools."""
    return np.asarray(ranks, dtype=float) / float(pool_size) * 10.0


def train_td(
    cluster: DocumentCluster,
    space: FeatureSpace,
    db: SummaryDB,
    reward,
    config: RlConfig,
    seed: int = 0,
) -> LinearValueModel:
    """Linear TD(0) over pool replay with softmax episode sampling."""
    rng = np.random.default_rng(seed)
    rewards = _reward_array(db, reward)
    prefixes = _PrefixFeatures(db, cluster, space)
    feature_matrix = db.feature_matrix
    theta = np.zeros(space.dim)
    alpha = config.learning_rate
    for _ in range(config.episodes):
        probs = softmax(feature_matrix @ theta)
        y = int(rng.choice(len(db), p=probs))
        rows = prefixes(y)
        k = rows.shape[0] - 1
        if k == 0:
            continue
        for i in range(k):
            target = rewards[y] if i + 1 == k else float(rows[i + 1] @ theta)
            theta += alpha * (target - float(rows[i] @ theta)) * rows[i]
    return LinearValueModel(theta=theta)


def _guarded_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ridge = 0.0
    eye = np.eye(a.shape[0])
    for _ in range(4):
        try:
            theta = np.linalg.solve(a + ridge * eye, b)
        except np.linalg.LinAlgError:
            theta = None
        if theta is not None and np.all(np.isfinite(theta)):
            return theta
        ridge = 1e-8 if ridge == 0.0 else ridge * 1e3
    raise np.linalg.LinAlgError("value system singular even after regularization")


def train_lstd(
    cluster: DocumentCluster,
    space: FeatureSpace,
    db: SummaryDB,
    reward,
    config: RlConfig,
    seed: int = 0,
) -> LinearValueModel:
    """Least-squares TD over the same replayed trajectories as ``train_td``.

    The statistics matrix starts as a diagonal matrix with uniform(0, 1)
    entries; the value weights solve the accumulated system.
    """
    rng = np.random.default_rng(seed)
    rewards = _reward_array(db, reward)
    prefixes = _PrefixFeatures(db, cluster, space)
    feature_matrix = db.feature_matrix
    a = np.diag(rng.uniform(0.0, 1.0, size=space.dim))
    b = np.zeros(space.dim)
    theta = np.zeros(space.dim)
    for _ in range(config.episodes):
        probs = softmax(feature_matrix @ theta)
        y = int(rng.choice(len(db), p=probs))
        rows = prefixes(y)
        k = rows.shape[0] - 1
        if k == 0:
            continue
        for i in range(k):
            next_row = np.zeros(space.dim) if i + 1 == k else rows[i + 1]
            a += np.outer(rows[i], rows[i] - next_row)
            if i + 1 == k:
                b += rewards[y] * rows[i]
        theta = _guarded_solve(a, b)
    return LinearValueModel(theta=_guarded_solve(a, b))


def train_ntd(
    cluster: DocumentCluster,
    space: FeatureSpace,
    db: SummaryDB,
    ranking_reward,
    config: RlConfig,
    seed: int = 0,
    progress_cb: Callable[[int, "NeuralValueModel"], None] | None = None,
) -> NeuralValueModel:
    """Neural TD with pool replay and a periodically synced target network.

    Each episode samples a pool summary with probability proportional to
    exp(V), replays its prefix states, accumulates squared TD errors against
    the frozen target copy (the final target is the summary's reward) and
    applies one Adam step.  The target copy is refreshed every
    ``config.sync_period`` episodes.
    """
    rng = np.random.default_rng(seed)
    rewards = _reward_array(db, ranking_reward)
    prefixes = _PrefixFeatures(db, cluster, space)
    feature_matrix = db.feature_matrix
    model = NeuralValueModel(space.dim, config.hidden_dim, seed=seed)
    for episode in range(1, config.episodes + 1):
        probs = softmax(model.values(feature_matrix))
        y = int(rng.choice(len(db), p=probs))
        rows = prefixes(y)
        k = rows.shape[0] - 1
        if k == 0:
            continue
        targets = np.empty(k)
        if k > 1:
            targets[: k - 1] = model.target_values(rows[1:k])
        targets[k - 1] = rewards[y]
        loss, grads = model.loss_and_grads(rows[:k], targets)
        if not np.isfinite(loss):
            raise TrainingDiverged(episode, loss, model.grad_norm(grads))
        model.adam_step(grads, config)
        model.loss_history.append(loss)
        if episode % config.sync_period == 0:
            model.sync_target()
        if progress_cb is not None:
            progress_cb(episode, model)
    return model


def _batch_normalize(counts: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(counts, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return counts / norms


def derive_policy(
    value_model,
    cluster: DocumentCluster,
    space: FeatureSpace,
    mode: str = "greedy",
    rng: np.random.Generator | None = None,
) -> Summary:
    """Emit a legal summary from learnt values.

    Actions are scored by the value of their successor state.  Terminate
    leads to the absorbing state, which has no future return, so it scores
    zero; greedy therefore extends the draft while some fitting sentence has
    positive value and softmax samples proportionally to exp(score).
    Terminating at the empty draft is excluded.
    """
    if mode not in ("greedy", "softmax"):
        raise ValueError("mode must be greedy or softmax")
    if mode == "softmax" and rng is None:
        raise ValueError("softmax mode needs an rng")
    lengths = np.array([s.token_count for s in cluster.sentences])
    sentence_counts = np.vstack(
        [bigram_counts([i], cluster, space) for i in range(len(cluster.sentences))]
    )
    draft: list[int] = []
    counts = np.zeros(space.dim)
    total_tokens = 0
    while True:
        used = set(draft)
        fits = [
            i
            for i in range(len(cluster.sentences))
            if i not in used and total_tokens + lengths[i] <= cluster.length_limit
        ]
        if not fits:
            break
        successor_features = _batch_normalize(counts + sentence_counts[fits])
        successor_values = np.asarray(value_model.values(successor_features), dtype=float)
        terminate_value = 0.0 if draft else None

        if mode == "greedy":
            best = int(np.argmax(successor_values))
            if terminate_value is not None and terminate_value >= successor_values[best]:
                break
            chosen = fits[best]
        else:
            values = list(successor_values)
            if terminate_value is not None:
                values.append(terminate_value)
            probs = softmax(np.array(values))
            pick = int(rng.choice(len(values), p=probs))
            if terminate_value is not None and pick == len(fits):
                break
            chosen = fits[pick]
        draft.append(chosen)
        counts += sentence_counts[chosen]
        total_tokens += int(lengths[chosen])
    return make_summary(-1, tuple(draft), cluster, space)


def brute_force_best(
    cluster: DocumentCluster,
    space: FeatureSpace,
    reward_fn: Callable[[tuple[int, ...]], float],
    order_insensitive: bool = True,
    guard: int = 10**6,
) -> Summary:
    """Exhaustive maximizer of ``reward_fn`` over legal non-empty sentence subsets.

    The caller asserts order insensitivity of the reward; subsets are visited
    in lexicographic id order so ties keep the lexicographically smallest set.
    """
    if not order_insensitive:
        raise ValueError("order-sensitive rewards are not supported by the exhaustive oracle")
    lengths = [s.token_count for s in cluster.sentences]
    n = len(cluster.sentences)
    limit = cluster.length_limit
    best_reward = -np.inf
    best_ids: tuple[int, ...] | None = None
    visited = 0
    stack: list[int] = []

    def recurse(start: int, total: int) -> None:
        nonlocal best_reward, best_ids, visited
        for i in range(start, n):
            if total + lengths[i] > limit:
                continue
            stack.append(i)
            visited += 1
            if visited > guard:
                raise ValueError(
                    f"more than {guard} legal summaries; shrink the instance for exhaustive search"
                )
            reward = float(reward_fn(tuple(stack)))
            if reward > best_reward:
                best_reward = reward
                best_ids = tuple(stack)
            recurse(i + 1, total + lengths[i])
            stack.pop()

    recurse(0, 0)
    if best_ids is None:
        raise ValueError("no legal non-empty summary exists")
    return make_summary(-1, best_ids, cluster, space)


MODEL_MAGIC = "VMODEL"
MODEL_VERSION = 1


def save_value_model(model, path: str | Path, config_hash: str = "") -> None:
    """Persist a trained model: ASCII header line, then little-endian float64 params.

    Linear layout: theta.  Neural layout: W1 (row-major), b1, W2, b2, W3, b3.
    """
    if isinstance(model, LinearValueModel):
        kind = "linear"
        dims = [len(model.theta)]
        flat = np.asarray(model.theta, dtype="<f8")
    elif isinstance(model, NeuralValueModel):
        kind = "neural"
        dims = [model.input_dim, model.hidden_dim, model.hidden_dim]
        flat = model.flat_params().astype("<f8")
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    header = f"{MODEL_MAGIC}\t{MODEL_VERSION}\t{kind}\t{','.join(map(str, dims))}\t{config_hash}\n"
    Path(path).write_bytes(header.encode("ascii") + flat.tobytes())


def load_value_model(path: str | Path):
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError("missing model header")
    magic, version, kind, dims_text, _config_hash = data[:newline].decode("ascii").split("\t")
    if magic != MODEL_MAGIC or int(version) != MODEL_VERSION:
        raise ValueError("bad model magic or unsupported version")
    flat = np.frombuffer(data[newline + 1 :], dtype="<f8").astype(float)
    dims = [int(d) for d in dims_text.split(",")]
    if kind == "linear":
        if flat.size != dims[0]:
            raise ValueError("parameter count does not match header dims")
        return LinearValueModel(theta=flat.copy())
    if kind == "neural":
        model = NeuralValueModel(dims[0], dims[1], seed=0)
        model.set_flat_params(flat)
        model.sync_target()
        return model
    raise ValueError(f"unknown model kind {kind!r}")
