import numpy as np
import pytest

from prefsum.corpus import DocumentCluster, Sentence, build_feature_space, tokenize


def make_cluster(sentence_texts, references=(), length_limit=100, cluster_id="test"):
    """Build a cluster directly from sentence strings, bypassing disk."""
    sentences = tuple(
        Sentence(tokens=tokenize(text), doc_id=f"doc{i % 2}", text=text)
        for i, text in enumerate(sentence_texts)
    )
    refs = tuple(tokenize(r) for r in references)
    return DocumentCluster(
        id=cluster_id, sentences=sentences, references=refs, length_limit=length_limit
    )


@pytest.fixture
def toy_cluster():
    texts = [
        "the river flooded the northern valley last night",
        "rescue teams moved residents away from the river",
        "the northern valley reported heavy rain for days",
        "officials opened three shelters near the valley",
        "heavy rain kept falling on the flooded region",
        "farmers lost crops when the river broke its banks",
        "the mayor asked for calm and more sandbags",
        "volunteers filled sandbags along the river road",
    ]
    refs = [
        "the river flooded the northern valley after heavy rain and rescue teams moved residents to shelters",
        "heavy rain flooded the valley and volunteers filled sandbags along the river",
    ]
    return make_cluster(texts, refs, length_limit=30, cluster_id="toy-flood")


@pytest.fixture
def toy_space(toy_cluster):
    return build_feature_space(toy_cluster, dim=64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
