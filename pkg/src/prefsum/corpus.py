"""Document cluster ingestion and the bag-of-bigram summary feature space.

A cluster lives on disk as ``<cluster>/docs/*.txt`` (UTF-8 plain text) with
optional ``<cluster>/refs/*.txt`` reference summaries (one per file) and an
optional ``<cluster>/meta`` key=value file carrying ``length_limit``.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_LENGTH_LIMIT = 100
DEFAULT_FEATURE_DIM = 200

# Maximal runs of letters/digits on lowercased text; no stemming, no stopwords.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Guard list for the sentence splitter: a period after one of these words is
# not treated as a sentence boundary.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc",
    "co", "corp", "fig", "no", "al", "gen", "col", "sgt", "rep", "sen",
    "gov", "approx", "dept", "est", "min", "max", "e.g", "i.e", "u.s", "u.n",
}

_BOUNDARY_RE = re.compile(r"[.!?]+(?=\s)")


class CorpusFormatError(Exception):
    """The on-disk cluster layout does not match the documented format."""


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase and split into maximal runs of letters/digits."""
    return tuple(_TOKEN_RE.findall(text.lower()))


def _is_abbreviation(prefix: str) -> bool:
    m = re.search(r"(\S+)$", prefix)
    if m is None:
        return False
    word = m.group(1).lower().rstrip(".")
    if word in _ABBREVIATIONS:
        return True
    # Single-letter initials such as "J." in "J. Smith".
    return len(word) == 1 and word.isalpha()


def split_sentences(text: str) -> list[str]:
    """Split on ``.``, ``!`` or ``?`` followed by whitespace, guarding abbreviations."""
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        if "." in m.group(0) and m.group(0).strip(".") == "" and _is_abbreviation(text[: m.start()]):
            continue
        pieces.append(text[start : m.end()])
        start = m.end()
    pieces.append(text[start:])
    return [p.strip() for p in pieces if p.strip()]


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    doc_id: str
    text: str

    @property
    def token_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DocumentCluster:
    id: str
    sentences: tuple[Sentence, ...]
    references: tuple[tuple[str, ...], ...]
    length_limit: int = DEFAULT_LENGTH_LIMIT

    def __post_init__(self) -> None:
        if self.length_limit <= 0:
            raise ValueError("length_limit must be positive")
        for s in self.sentences:
            if len(s.tokens) < 1:
                raise ValueError("every sentence needs at least one token")

    @property
    def has_references(self) -> bool:
        return len(self.references) > 0

    def fingerprint(self) -> str:
        """Content hash used to re-validate persisted artifacts against the cluster."""
        h = hashlib.sha256()
        h.update(self.id.encode())
        h.update(str(self.length_limit).encode())
        for s in self.sentences:
            h.update(b"\x00".join(t.encode() for t in s.tokens))
            h.update(b"\x01")
        for r in self.references:
            h.update(b"\x00".join(t.encode() for t in r))
            h.update(b"\x02")
        return h.hexdigest()


def _read_meta(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CorpusFormatError(f"{path}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip().strip('"')
    return out


def load_cluster(
    path: str | Path,
    length_limit: int | None = None,
    pre_segmented: bool = False,
) -> DocumentCluster:
    """Load a document cluster from the documented directory layout.

    ``length_limit`` overrides both the default and any value in the cluster's
    ``meta`` file.  With ``pre_segmented`` each non-empty line is one sentence.
    """
    root = Path(path)
    docs_dir = root / "docs"
    if not docs_dir.is_dir():
        raise CorpusFormatError(f"{root}: missing docs/ directory")
    doc_files = sorted(docs_dir.glob("*.txt"))
    if not doc_files:
        raise CorpusFormatError(f"{docs_dir}: no .txt documents")

    meta_path = root / "meta"
    if length_limit is None and meta_path.is_file():
        meta = _read_meta(meta_path)
        if "length_limit" in meta:
            length_limit = int(meta["length_limit"])
    if length_limit is None:
        length_limit = DEFAULT_LENGTH_LIMIT

    sentences: list[Sentence] = []
    for doc in doc_files:
        text = doc.read_text(encoding="utf-8")
        raw = [ln for ln in text.splitlines() if ln.strip()] if pre_segmented else split_sentences(text)
        doc_sentences = []
        for sent_text in raw:
            tokens = tokenize(sent_text)
            if tokens:
                doc_sentences.append(Sentence(tokens=tokens, doc_id=doc.stem, text=sent_text))
        if not doc_sentences:
            log.warning("skipping empty document %s", doc)
            continue
        sentences.extend(doc_sentences)
    if not sentences:
        raise CorpusFormatError(f"{root}: all documents empty")

    references: list[tuple[str, ...]] = []
    refs_dir = root / "refs"
    if refs_dir.is_dir():
        for ref in sorted(refs_dir.glob("*.txt")):
            tokens = tokenize(ref.read_text(encoding="utf-8"))
            if tokens:
                references.append(tokens)

    return DocumentCluster(
        id=root.name,
        sentences=tuple(sentences),
        references=tuple(references),
        length_limit=length_limit,
    )


@dataclass(frozen=True)
class FeatureSpace:
    dim: int
    bigram_index: dict[tuple[str, str], int] = field(compare=False)

    def __post_init__(self) -> None:
        if len(self.bigram_index) > self.dim:
            raise ValueError("more indexed bigrams than dimensions")
        values = sorted(self.bigram_index.values())
        if values and (values != list(range(len(values))) or values[-1] >= self.dim):
            raise ValueError("bigram indices must be unique and in [0, dim)")


def sentence_bigrams(tokens: tuple[str, ...]) -> list[tuple[str, str]]:
    return list(zip(tokens, tokens[1:]))


def build_feature_space(cluster: DocumentCluster, dim: int = DEFAULT_FEATURE_DIM) -> FeatureSpace:
    """Index the ``dim`` most frequent document bigrams, ties broken lexicographically."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    counts: Counter[tuple[str, str]] = Counter()
    for sentence in cluster.sentences:
        counts.update(sentence_bigrams(sentence.tokens))
    if not counts:
        raise CorpusFormatError(f"cluster {cluster.id}: no bigrams to index")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    index = {bigram: i for i, (bigram, _) in enumerate(ranked[:dim])}
    return FeatureSpace(dim=dim, bigram_index=index)


def bigram_counts(sentence_ids, cluster: DocumentCluster, space: FeatureSpace) -> np.ndarray:
    """Unnormalized term-frequency vector over the indexed bigrams."""
    vec = np.zeros(space.dim)
    n = len(cluster.sentences)
    for sid in sentence_ids:
        if not 0 <= sid < n:
            raise IndexError(f"sentence id {sid} out of range for cluster {cluster.id}")
        for bigram in sentence_bigrams(cluster.sentences[sid].tokens):
            idx = space.bigram_index.get(bigram)
            if idx is not None:
                vec[idx] += 1.0
    return vec


def featurize(sentence_ids, cluster: DocumentCluster, space: FeatureSpace) -> np.ndarray:
    """L2-normalized bag-of-bigram vector; all-zero when no indexed bigram occurs."""
    vec = bigram_counts(sentence_ids, cluster, space)
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec
