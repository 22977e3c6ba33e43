import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefsum.metrics import (
    GoldUtilityUnavailable,
    gold_utility,
    rouge_l,
    rouge_n,
    rouge_su4,
    spearman,
    u_star,
)
from prefsum.summary_db import make_summary

from conftest import make_cluster


class TestRougeN:
    def test_unigram_hand_count(self):
        # overlap {the, cat} = 2 of 3 reference unigrams
        assert rouge_n("the cat sat".split(), ["the cat ran".split()], 1) == pytest.approx(2 / 3)

    def test_bigram_hand_count(self):
        # overlap {(the, cat)} = 1 of 2 reference bigrams
        assert rouge_n("the cat sat".split(), ["the cat ran".split()], 2) == pytest.approx(1 / 2)

    def test_identity(self):
        toks = "a b c d".split()
        assert rouge_n(toks, [list(toks)], 1) == 1.0
        assert rouge_n(toks, [list(toks)], 2) == 1.0

    def test_clipping(self):
        # candidate repeats "a" but the reference has it once
        assert rouge_n(["a", "a", "a"], [["a", "b"]], 1) == pytest.approx(1 / 2)

    def test_multi_reference_mean(self):
        cand = "a b".split()
        score = rouge_n(cand, [["a", "b"], ["c", "d"]], 1)
        assert score == pytest.approx((1.0 + 0.0) / 2)

    def test_empty_reference_is_error(self):
        with pytest.raises(ValueError):
            rouge_n(["a"], [[]], 1)
        with pytest.raises(ValueError):
            rouge_n(["a"], [], 1)

    def test_reference_permutation_invariance(self):
        cand = "a b c".split()
        refs = [["a", "b"], ["b", "c", "d"], ["x"]]
        assert rouge_n(cand, refs, 1) == rouge_n(cand, list(reversed(refs)), 1)


class TestRougeL:
    def test_identity(self):
        toks = "w x y z".split()
        assert rouge_l(toks, [list(toks)]) == 1.0

    def test_reversed_distinct_tokens(self):
        # LCS of "c b a" vs "a b c" has length 1
        assert rouge_l(["c", "b", "a"], [["a", "b", "c"]]) == pytest.approx(1 / 3)

    def test_disjoint(self):
        assert rouge_l(["p", "q"], [["x", "y"]]) == 0.0


def su4_brute_force(cand, ref):
    """Independent skip-bigram + unigram recall via exhaustive pair enumeration."""
    def units(tokens):
        out = {}
        for tok in tokens:
            out[("u", tok)] = out.get(("u", tok), 0) + 1
        for i, j in itertools.combinations(range(len(tokens)), 2):
            if j - i <= 4:
                key = ("s", tokens[i], tokens[j])
                out[key] = out.get(key, 0) + 1
        return out

    cu, ru = units(cand), units(ref)
    total = sum(ru.values())
    overlap = sum(min(c, cu.get(k, 0)) for k, c in ru.items())
    return overlap / total


class TestRougeSu4:
    def test_identity(self):
        toks = "a b c d e".split()
        assert rouge_su4(toks, [list(toks)]) == 1.0

    def test_disjoint(self):
        assert rouge_su4(["a", "b"], [["x", "y"]]) == 0.0

    def test_matches_brute_force_enumeration(self):
        cand = "a b c d".split()
        ref = "a c b d".split()
        assert rouge_su4(cand, [ref]) == pytest.approx(su4_brute_force(cand, ref))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=9),
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=9),
    )
    def test_matches_brute_force_random(self, cand, ref):
        assert rouge_su4(cand, [ref]) == pytest.approx(su4_brute_force(cand, ref))


class TestGoldUtility:
    def test_upper_bound_scores_give_ten(self):
        # identical candidate and reference: all recalls are 1, well above the
        # upper bounds, so the value clamps to 10
        toks = "a b c d e".split()
        assert gold_utility(toks, [list(toks)]) == 10.0

    def test_all_zero_rouge_gives_zero(self):
        assert gold_utility(["p", "q"], [["x", "y", "z"]]) == 0.0

    def test_half_upper_bounds_give_five(self, monkeypatch):
        # plug the component values straight into the formula
        import prefsum.metrics as m

        monkeypatch.setattr(m, "rouge_n", lambda c, r, n: 0.235 if n == 1 else 0.11)
        monkeypatch.setattr(m, "rouge_su4", lambda c, r: 0.09)
        assert m.gold_utility(["x"], [["y"]]) == pytest.approx(5.0)

    def test_monotone_in_each_component(self, monkeypatch):
        import prefsum.metrics as m

        def value(r1, r2, su):
            monkeypatch.setattr(m, "rouge_n", lambda c, r, n: r1 if n == 1 else r2)
            monkeypatch.setattr(m, "rouge_su4", lambda c, r: su)
            return m.gold_utility(["x"], [["y"]])

        base = value(0.1, 0.05, 0.04)
        assert value(0.12, 0.05, 0.04) >= base
        assert value(0.1, 0.06, 0.04) >= base
        assert value(0.1, 0.05, 0.05) >= base

    def test_u_star_requires_references(self, toy_cluster, toy_space):
        bare = make_cluster(["no references here"], cluster_id="bare")
        summary = make_summary(0, [0], toy_cluster, toy_space)
        with pytest.raises(GoldUtilityUnavailable):
            u_star(summary, bare)

    def test_u_star_on_toy_cluster(self, toy_cluster, toy_space):
        summary = make_summary(0, [0, 2], toy_cluster, toy_space)
        value = u_star(summary, toy_cluster)
        assert 0.0 < value <= 10.0


class TestSpearman:
    def test_identical_rankings(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed_example(self):
        # d^2 = (0, 1, 1, 0): rho = 1 - 6*2 / (4 * 15) = 0.8
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_vector_is_error(self):
        with pytest.raises(ValueError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_length_mismatch_is_error(self):
        with pytest.raises(ValueError):
            spearman([1, 2], [1, 2, 3])

    def test_tie_handling_average_ranks(self):
        # scipy.stats.spearmanr cross-check for a tied input
        assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(0.9486832980505139)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.integers(min_value=1, max_value=10_000), min_size=3, max_size=25, unique=True)
    )
    def test_monotone_invariance(self, ints):
        # integer-valued inputs keep 2x+3 and x^3 injective in floating point
        values = [float(v) for v in ints]
        rng = np.random.default_rng(7)
        other = rng.normal(size=len(values))
        if np.ptp(other) == 0.0:
            other[0] += 1.0
        base = spearman(values, other)
        affine = spearman([2 * v + 3 for v in values], other)
        cubed = spearman([v**3 for v in values], other)
        assert affine == pytest.approx(base)
        assert cubed == pytest.approx(base)
