"""Synthetic document clusters with planted references.

Clusters are assembled from reusable topic phrases: reference summaries
concatenate the phrases, and each sentence copies zero, one or two phrase
spans before filler padding.  Candidate summaries then cover a controllable
fraction of the reference n-grams, giving a wide, well-behaved spread of gold
utilities for desk-scale experiments.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .corpus import DocumentCluster, Sentence

TOPIC_VOCAB = 400
FILLER_VOCAB = 90
PHRASES = 28
REFERENCE_PHRASES = 16
PHRASE_LENGTH = (4, 9)
SENTENCES = (10, 40)
SENTENCE_FILLER = (4, 9)
PHRASE_COVER_PROB = 0.55


def _disjoint_phrases(
    rng: np.random.Generator,
    topic_words: list[str],
    n_phrases: int = PHRASES,
    phrase_length: tuple[int, int] = PHRASE_LENGTH,
) -> list[list[str]]:
    # phrases draw disjoint word sets, so reference recall grows cleanly with
    # the distinct phrase mass a summary covers and stays below the clamp
    order = rng.permutation(len(topic_words))
    phrases = []
    cursor = 0
    for _ in range(n_phrases):
        length = int(rng.integers(phrase_length[0], phrase_length[1] + 1))
        phrases.append([topic_words[int(i)] for i in order[cursor : cursor + length]])
        cursor += length
    return phrases


def synthetic_cluster(
    cluster_id: str,
    seed: int,
    n_sentences: int | None = None,
    length_limit: int = 100,
    n_phrases: int = PHRASES,
    n_reference_phrases: int | None = REFERENCE_PHRASES,
    phrase_length: tuple[int, int] = PHRASE_LENGTH,
    cover_prob: float = PHRASE_COVER_PROB,
    filler_range: tuple[int, int] = SENTENCE_FILLER,
    pad_to_limit: bool = True,
) -> DocumentCluster:
    """One synthetic cluster.

    The defaults give the smooth stage-1 regime: documents circulate more
    phrases than the references contain, so part of the frequent topical
    content is a distractor and importance cannot be read off the frequency
    profile alone.  Fewer, longer phrases with ``pad_to_limit=False`` give
    small chunky instances whose optima stand clear of the pack, which the
    exhaustive-search comparisons rely on.
    """
    rng = np.random.default_rng(seed)
    topic_words = [f"topic{k:03d}" for k in range(TOPIC_VOCAB)]
    filler_words = [f"filler{k:02d}" for k in range(FILLER_VOCAB)]
    phrases = _disjoint_phrases(rng, topic_words, n_phrases, phrase_length)

    if n_sentences is None:
        n_sentences = int(rng.integers(SENTENCES[0], SENTENCES[1] + 1))

    # references cover a subset of the circulating phrases: one full ordering
    # plus a reshuffled sub-subset as the second reference
    if n_reference_phrases is None:
        n_reference_phrases = n_phrases
    n_reference_phrases = min(n_reference_phrases, n_phrases)
    ref_idx = rng.permutation(n_phrases)[:n_reference_phrases]
    primary = [tok for idx in ref_idx for tok in phrases[idx]]
    sub = rng.permutation(n_reference_phrases)[: max(1, n_reference_phrases * 2 // 3)]
    secondary = [tok for k in sub for tok in phrases[int(ref_idx[int(k)])]]
    references = (tuple(primary), tuple(secondary))

    sentences = []
    total_tokens = 0
    # candidate pools only vary when the cluster holds several times the
    # length budget, so keep adding sentences past the nominal count if needed
    while len(sentences) < n_sentences or (pad_to_limit and total_tokens < 3 * length_limit):
        tokens: list[str] = []
        if rng.random() < cover_prob:
            for _ in range(1 if rng.random() < 0.7 else 2):
                phrase = phrases[int(rng.integers(n_phrases))]
                span = max(2, int(rng.integers(2, len(phrase) + 1)))
                start = int(rng.integers(0, len(phrase) - span + 1))
                tokens.extend(phrase[start : start + span])
        n_filler = int(rng.integers(filler_range[0], filler_range[1] + 1))
        tokens.extend(
            filler_words[int(k)] for k in rng.integers(0, FILLER_VOCAB, size=n_filler)
        )
        sentences.append(Sentence(tokens=tuple(tokens), doc_id="", text=" ".join(tokens)))
        total_tokens += len(tokens)

    # contiguous doc blocks keep sentence order stable through an export and
    # reload of the on-disk layout
    per_doc = max(1, (len(sentences) + 2) // 3)
    sentences = [
        replace(s, doc_id=f"doc{i // per_doc}") for i, s in enumerate(sentences)
    ]

    return DocumentCluster(
        id=cluster_id,
        sentences=tuple(sentences),
        references=references,
        length_limit=length_limit,
    )


def synthetic_corpus(
    count: int, master_seed: int, length_limit: int = 100
) -> list[DocumentCluster]:
    """Deterministic family of clusters derived from one master seed."""
    from .config import child_seed

    return [
        synthetic_cluster(
            f"syn-{i:03d}",
            seed=child_seed(master_seed, "synthetic", i),
            length_limit=length_limit,
        )
        for i in range(count)
    ]


def rl_suite_cluster(
    cluster_id: str,
    seed: int,
    n_phrases: int = 6,
    n_duplicates: int = 2,
    n_filler: int = 4,
    length_limit: int = 30,
) -> DocumentCluster:
    """Tiny cluster for exhaustive-search comparisons.

    Each topic sentence carries one full disjoint phrase; two phrases appear
    twice (redundancy traps whose second copy is worthless, a diminishing
    return a linear value cannot express), plus pure-filler sentences.  The
    optimum is unambiguous and stands well clear of near misses.
    """
    rng = np.random.default_rng(seed)
    topic_words = [f"topic{k:03d}" for k in range(TOPIC_VOCAB)]
    filler_words = [f"filler{k:02d}" for k in range(FILLER_VOCAB)]
    order = rng.permutation(TOPIC_VOCAB)
    cursor = 0
    phrases = []
    for _ in range(n_phrases):
        length = int(rng.integers(6, 9))
        phrases.append([topic_words[int(k)] for k in order[cursor : cursor + length]])
        cursor += length

    sentences: list[Sentence] = []

    def add_sentence(tokens: list[str]) -> None:
        sentences.append(
            Sentence(tokens=tuple(tokens), doc_id=f"doc{len(sentences) % 3}", text=" ".join(tokens))
        )

    for phrase in phrases:
        pad = [filler_words[int(k)] for k in rng.integers(0, FILLER_VOCAB, size=int(rng.integers(1, 3)))]
        add_sentence(list(phrase) + pad)
    for idx in rng.choice(n_phrases, size=n_duplicates, replace=False):
        pad = [filler_words[int(k)] for k in rng.integers(0, FILLER_VOCAB, size=int(rng.integers(1, 3)))]
        add_sentence(list(phrases[int(idx)]) + pad)
    for _ in range(n_filler):
        add_sentence([filler_words[int(k)] for k in rng.integers(0, FILLER_VOCAB, size=int(rng.integers(7, 10)))])

    ref_order = rng.permutation(n_phrases)
    reference = tuple(tok for i in ref_order for tok in phrases[i])
    return DocumentCluster(
        id=cluster_id,
        sentences=tuple(sentences),
        references=(reference,),
        length_limit=length_limit,
    )


def export_cluster(cluster: DocumentCluster, root) -> None:
    """Write a cluster to the documented on-disk layout."""
    from pathlib import Path

    base = Path(root) / cluster.id
    (base / "docs").mkdir(parents=True, exist_ok=True)
    docs: dict[str, list[str]] = {}
    for sentence in cluster.sentences:
        docs.setdefault(sentence.doc_id, []).append(sentence.text + ".")
    for doc_id, lines in docs.items():
        (base / "docs" / f"{doc_id}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cluster.references:
        (base / "refs").mkdir(exist_ok=True)
        for i, ref in enumerate(cluster.references):
            (base / "refs" / f"ref{i}.txt").write_text(" ".join(ref) + "\n", encoding="utf-8")
    (base / "meta").write_text(f"length_limit = {cluster.length_limit}\n", encoding="utf-8")
