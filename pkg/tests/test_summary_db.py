import numpy as np
import pytest

from prefsum.corpus import build_feature_space, featurize
from prefsum.summary_db import (
    DbFormatError,
    DbValidationError,
    generate_db,
    load_db,
    make_summary,
    persist_db,
)

from conftest import make_cluster


class TestGenerate:
    def test_all_candidates_legal(self, toy_cluster, toy_space):
        db = generate_db(toy_cluster, toy_space, size=200, seed=3)
        assert len(db) == 200
        for s in db.summaries:
            assert s.token_count <= toy_cluster.length_limit
            assert len(set(s.sentence_ids)) == len(s.sentence_ids)

    def test_ids_dense(self, toy_cluster, toy_space):
        db = generate_db(toy_cluster, toy_space, size=50, seed=1)
        assert [s.id for s in db.summaries] == list(range(50))

    def test_single_sentence_cluster_duplicates_permitted(self):
        cluster = make_cluster(["just one sentence with a few tokens"], length_limit=100)
        space = build_feature_space(cluster, dim=16)
        db = generate_db(cluster, space, size=2, seed=0)
        assert db[0].sentence_ids == (0,)
        assert db[1].sentence_ids == (0,)

    def test_size_below_two_is_error(self, toy_cluster, toy_space):
        with pytest.raises(ValueError):
            generate_db(toy_cluster, toy_space, size=1, seed=0)

    def test_determinism(self, toy_cluster, toy_space):
        a = generate_db(toy_cluster, toy_space, size=100, seed=9)
        b = generate_db(toy_cluster, toy_space, size=100, seed=9)
        assert [s.sentence_ids for s in a.summaries] == [s.sentence_ids for s in b.summaries]
        assert a.fingerprint() == b.fingerprint()

    def test_cached_features_coherent(self, toy_cluster, toy_space):
        db = generate_db(toy_cluster, toy_space, size=60, seed=4)
        for s in db.summaries[:20]:
            np.testing.assert_array_equal(
                s.features, featurize(s.sentence_ids, toy_cluster, toy_space)
            )

    def test_inclusion_frequencies_match_independent_sampler(self):
        # Uniform toy cluster: every sentence has the same length, so the
        # analytic per-sentence inclusion probability is shared.  Estimate it
        # with an independent Monte-Carlo sampler and check each sentence's
        # observed frequency lies within 5 sigma.
        texts = [f"word{i} filler{i} extra{i} pad{i} tail{i}" for i in range(20)]
        cluster = make_cluster(texts, length_limit=26)  # five tokens each, five fit
        space = build_feature_space(cluster, dim=32)
        size = 5000
        db = generate_db(cluster, space, size=size, seed=11)

        rng = np.random.default_rng(999)
        trials = 20000
        hits = 0
        for _ in range(trials):
            perm = rng.permutation(20)
            total = 0
            chosen = []
            for idx in perm:
                if total + 5 > 26:
                    break
                chosen.append(idx)
                total += 5
            hits += 0 in chosen
        p = hits / trials  # analytic value is 5/20 = 0.25; the MC estimate avoids bias
        sigma = np.sqrt(p * (1 - p) / size)

        for sid in range(20):
            freq = sum(sid in s.sentence_ids for s in db.summaries) / size
            assert abs(freq - p) <= 5 * sigma


class TestPersistence:
    def test_round_trip_identity(self, toy_cluster, toy_space, tmp_path):
        db = generate_db(toy_cluster, toy_space, size=80, seed=5)
        path = tmp_path / "pool.tsv"
        persist_db(db, path)
        loaded = load_db(path, toy_cluster, toy_space)
        assert loaded.cluster_id == db.cluster_id
        assert loaded.seed == db.seed
        assert [s.sentence_ids for s in loaded.summaries] == [
            s.sentence_ids for s in db.summaries
        ]
        assert loaded.fingerprint() == db.fingerprint()

    def test_persisted_bytes_deterministic(self, toy_cluster, toy_space, tmp_path):
        db = generate_db(toy_cluster, toy_space, size=30, seed=7)
        p1, p2 = tmp_path / "a", tmp_path / "b"
        persist_db(db, p1)
        persist_db(db, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_cluster_mismatch(self, toy_cluster, toy_space, tmp_path):
        db = generate_db(toy_cluster, toy_space, size=10, seed=2)
        path = tmp_path / "pool.tsv"
        persist_db(db, path)
        other = make_cluster(["totally different content here"], cluster_id="other")
        other_space = build_feature_space(other, dim=8)
        with pytest.raises(DbValidationError):
            load_db(path, other, other_space)

    def test_truncated_file_reports_offset(self, toy_cluster, toy_space, tmp_path):
        db = generate_db(toy_cluster, toy_space, size=20, seed=2)
        path = tmp_path / "pool.tsv"
        persist_db(db, path)
        data = path.read_bytes()
        cut = int(len(data) * 0.6)
        path.write_bytes(data[:cut])
        with pytest.raises(DbFormatError) as err:
            load_db(path, toy_cluster, toy_space)
        assert "byte offset" in str(err.value)

    def test_make_summary_rejects_duplicates(self, toy_cluster, toy_space):
        with pytest.raises(ValueError):
            make_summary(0, [1, 1], toy_cluster, toy_space)
