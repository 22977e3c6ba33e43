"""Candidate summary pool: random generation, persistence and validation.

The pool doubles as the query pool for preference learning and as the replay
memory of the RL stage, so regeneration with identical inputs must be
bit-identical.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DocumentCluster, FeatureSpace, featurize

log = logging.getLogger(__name__)

FORMAT_MAGIC = "SUMDB"
FORMAT_VERSION = 1

# Resampling attempts per candidate before a duplicate sentence set is kept.
DUPLICATE_RETRY_CAP = 50


class DbFormatError(Exception):
    """The persisted pool file is malformed or truncated."""


class DbValidationError(Exception):
    """The persisted pool does not belong to the given cluster."""


@dataclass(frozen=True)
class Summary:
    id: int
    sentence_ids: tuple[int, ...]
    token_count: int
    features: np.ndarray = field(repr=False, compare=False)


def make_summary(summary_id: int, sentence_ids, cluster: DocumentCluster, space: FeatureSpace) -> Summary:
    ids = tuple(int(i) for i in sentence_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("sentence ids must be distinct")
    token_count = sum(cluster.sentences[i].token_count for i in ids)
    return Summary(
        id=summary_id,
        sentence_ids=ids,
        token_count=token_count,
        features=featurize(ids, cluster, space),
    )


@dataclass
class SummaryDB:
    cluster_id: str
    cluster_fingerprint: str
    seed: int
    summaries: tuple[Summary, ...]
    generator: str = "random"

    def __len__(self) -> int:
        return len(self.summaries)

    def __getitem__(self, summary_id: int) -> Summary:
        return self.summaries[summary_id]

    @property
    def feature_matrix(self) -> np.ndarray:
        cached = getattr(self, "_feature_matrix", None)
        if cached is None:
            cached = np.vstack([s.features for s in self.summaries])
            object.__setattr__(self, "_feature_matrix", cached)
        return cached

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.cluster_id}|{self.cluster_fingerprint}|{self.seed}|{len(self)}".encode())
        for s in self.summaries:
            h.update(",".join(map(str, s.sentence_ids)).encode())
            h.update(b"\n")
        return h.hexdigest()


def _sample_candidate(rng: np.random.Generator, lengths: np.ndarray, limit: int) -> tuple[int, ...]:
    # Walk a random permutation, appending while the summary stays within the
    # limit; the first sentence that does not fit ends the candidate.
    ids: list[int] = []
    total = 0
    for idx in rng.permutation(len(lengths)):
        if total + lengths[idx] > limit:
            break
        ids.append(int(idx))
        total += int(lengths[idx])
    return tuple(ids)


def generate_db(
    cluster: DocumentCluster,
    space: FeatureSpace,
    size: int,
    seed: int,
) -> SummaryDB:
    """Sample ``size`` legal summaries by uniform sentence selection.

    Candidates duplicating an already-sampled sentence set are resampled up to
    a retry cap, after which the duplicate is kept with a warning.
    """
    if size < 2:
        raise ValueError("pool size must be >= 2 for pair querying")
    if not cluster.sentences:
        raise ValueError("cluster has no sentences")
    rng = np.random.default_rng(seed)
    lengths = np.array([s.token_count for s in cluster.sentences])
    seen: set[frozenset[int]] = set()
    summaries: list[Summary] = []
    duplicates = 0
    for summary_id in range(size):
        ids = _sample_candidate(rng, lengths, cluster.length_limit)
        for _ in range(DUPLICATE_RETRY_CAP):
            if frozenset(ids) not in seen:
                break
            ids = _sample_candidate(rng, lengths, cluster.length_limit)
        else:
            duplicates += 1
        seen.add(frozenset(ids))
        summaries.append(make_summary(summary_id, ids, cluster, space))
    if duplicates:
        log.warning(
            "pool for %s keeps %d duplicate candidates after %d retries each",
            cluster.id, duplicates, DUPLICATE_RETRY_CAP,
        )
    return SummaryDB(
        cluster_id=cluster.id,
        cluster_fingerprint=cluster.fingerprint(),
        seed=seed,
        summaries=tuple(summaries),
    )


def persist_db(db: SummaryDB, path: str | Path) -> None:
    lines = [
        f"{FORMAT_MAGIC}\t{FORMAT_VERSION}",
        f"cluster\t{db.cluster_id}",
        f"cluster_sha\t{db.cluster_fingerprint}",
        f"seed\t{db.seed}",
        f"size\t{len(db)}",
    ]
    for s in db.summaries:
        lines.append(f"{s.id}\t{','.join(map(str, s.sentence_ids))}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _header_line(lines, index: int, key: str, offset: int) -> str:
    if index >= len(lines):
        raise DbFormatError(f"truncated header at byte offset {offset}")
    parts = lines[index].split("\t")
    if len(parts) != 2 or parts[0] != key:
        raise DbFormatError(f"expected {key} header at byte offset {offset}")
    return parts[1]


def load_db(path: str | Path, cluster: DocumentCluster, space: FeatureSpace) -> SummaryDB:
    """Load a persisted pool, re-validating it against ``cluster``.

    Features are recomputed on load, so the result is identical to the
    originally generated pool.
    """
    data = Path(path).read_bytes().decode("utf-8")
    lines = data.split("\n")
    offsets = [0]
    for line in lines:
        offsets.append(offsets[-1] + len(line.encode("utf-8")) + 1)

    if not lines or lines[0] != f"{FORMAT_MAGIC}\t{FORMAT_VERSION}":
        raise DbFormatError("bad magic or unsupported version at byte offset 0")
    cluster_id = _header_line(lines, 1, "cluster", offsets[1])
    cluster_sha = _header_line(lines, 2, "cluster_sha", offsets[2])
    seed = int(_header_line(lines, 3, "seed", offsets[3]))
    size = int(_header_line(lines, 4, "size", offsets[4]))

    if cluster_id != cluster.id:
        raise DbValidationError(f"pool belongs to cluster {cluster_id!r}, not {cluster.id!r}")
    if cluster_sha != cluster.fingerprint():
        raise DbValidationError("cluster content changed since the pool was generated")

    summaries: list[Summary] = []
    for i in range(size):
        line_no = 5 + i
        offset = offsets[line_no] if line_no < len(offsets) else offsets[-1]
        if line_no >= len(lines) or not lines[line_no]:
            raise DbFormatError(f"truncated file: record {i} missing at byte offset {offset}")
        parts = lines[line_no].split("\t")
        if len(parts) != 2:
            raise DbFormatError(f"malformed record at byte offset {offset}")
        try:
            summary_id = int(parts[0])
            ids = tuple(int(x) for x in parts[1].split(",")) if parts[1] else ()
        except ValueError as exc:
            raise DbFormatError(f"malformed record at byte offset {offset}: {exc}") from exc
        if summary_id != i:
            raise DbFormatError(f"non-dense summary id {summary_id} at byte offset {offset}")
        summaries.append(make_summary(summary_id, ids, cluster, space))
    return SummaryDB(
        cluster_id=cluster_id,
        cluster_fingerprint=cluster_sha,
        seed=seed,
        summaries=tuple(summaries),
    )
