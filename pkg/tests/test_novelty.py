import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchloop import novelty
from patchloop.novelty import (
    BothEmpty,
    CorpusIndex,
    DuplicateEntry,
    EmptySet,
    FamilyMismatch,
    MinHashSignature,
    ShingleSet,
    admit_novel,
    exact_jaccard,
    jaccard_estimate,
    normalize,
    novelty_score,
    shingle,
    signature,
)

MERSENNE_P = (1 << 61) - 1


class TestNormalize:
    def test_collapses_runs_and_strips_edges(self):
        assert normalize("  a   b\t c  ") == "a b c"

    def test_drops_blank_lines(self):
        assert normalize("x\n\n   \ny\n") == "x\ny"

    def test_plain_text_unchanged(self):
        assert normalize("def f(x):\nreturn x") == "def f(x):\nreturn x"


class TestShingle:
    def test_distinct_gram_count(self):
        s = shingle("abcdefghijk")
        assert len(s) == 2
        assert "abcdefghij" in s.shingles
        assert "bcdefghijk" in s.shingles

    def test_repeated_text_dedupes(self):
        assert len(shingle("aaaaaaaaaa" + "aa")) == 1

    def test_short_text_flags_instead_of_raising(self):
        s = shingle("tiny")
        assert len(s) == 0
        assert s.too_short

    def test_normalization_applied_by_default(self):
        spaced = "alpha    beta gamma delta"
        assert shingle(spaced).shingles == shingle("alpha beta gamma delta").shingles
        assert shingle(spaced, normalized=False) != shingle(spaced)


class TestModMul:
    def test_matches_bigint_arithmetic(self):
        rng = random.Random(11)
        a = np.asarray(
            [rng.randrange(MERSENNE_P) for _ in range(500)], dtype=np.uint64
        )
        x = np.asarray(
            [rng.randrange(MERSENNE_P) for _ in range(500)], dtype=np.uint64
        )
        got = novelty._mulmod_mersenne(a, x)
        for ai, xi, gi in zip(a.tolist(), x.tolist(), got.tolist()):
            assert gi == (ai * xi) % MERSENNE_P

    def test_extremes(self):
        top = np.asarray([MERSENNE_P - 1], dtype=np.uint64)
        got = novelty._mulmod_mersenne(top, top)
        assert got[0] == ((MERSENNE_P - 1) ** 2) % MERSENNE_P


class TestSignature:
    def test_length_and_family_tag(self):
        sig = signature(shingle("x = torch.relu(self.conv1(x))"), seed=7)
        assert len(sig.values) == 256
        assert sig.permutation_seed == 7
        assert all(0 <= v < MERSENNE_P for v in sig.values)

    def test_deterministic(self):
        s = shingle("self.fc = nn.Linear(128, 10)")
        assert signature(s, 42) == signature(s, 42)
        assert signature(s, 42) != signature(s, 43)

    def test_empty_set_rejected(self):
        with pytest.raises(EmptySet):
            signature(ShingleSet(frozenset()), seed=1)

    def test_union_takes_componentwise_min(self):
        sa = shingle("first network body with conv layers")
        sb = shingle("second network body with linear layers")
        union = ShingleSet(sa.shingles | sb.shingles)
        va = signature(sa, 5).values
        vb = signature(sb, 5).values
        vu = signature(union, 5).values
        assert vu == tuple(min(x, y) for x, y in zip(va, vb))


def _sets_with_jaccard(matching: int, total: int, rng: random.Random):
    """Two shingle sets sharing exactly ``matching`` of ``total`` grams each."""
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    grams: set[str] = set()
    while len(grams) < 2 * total - matching:
        grams.add("".join(rng.choice(alphabet) for _ in range(10)))
    ordered = sorted(grams)
    shared = ordered[:matching]
    only_a = ordered[matching:total]
    only_b = ordered[total : 2 * total - matching]
    return (
        ShingleSet(frozenset(shared + only_a)),
        ShingleSet(frozenset(shared + only_b)),
    )


class TestJaccardEstimate:
    def test_identical_sets_estimate_one(self):
        s = shingle("identical candidate source text for similarity")
        assert jaccard_estimate(signature(s, 3), signature(s, 3)) == 1.0

    def test_disjoint_sets_estimate_near_zero(self):
        rng = random.Random(2)
        sa, sb = _sets_with_jaccard(0, 120, rng)
        est = jaccard_estimate(signature(sa, 9), signature(sb, 9))
        assert est <= 0.05

    def test_one_third_overlap_within_three_sigma(self):
        rng = random.Random(4)
        sa, sb = _sets_with_jaccard(50, 100, rng)
        assert exact_jaccard(sa, sb) == pytest.approx(1 / 3)
        est = jaccard_estimate(signature(sa, 1), signature(sb, 1))
        assert abs(est - 1 / 3) <= 0.09

    def test_family_mismatch(self):
        s = shingle("any candidate text that shingles fine")
        with pytest.raises(FamilyMismatch):
            jaccard_estimate(signature(s, 1), signature(s, 2))


class TestExactJaccard:
    def test_counts_intersection_over_union(self):
        rng = random.Random(6)
        sa, sb = _sets_with_jaccard(5, 10, rng)
        assert exact_jaccard(sa, sb) == pytest.approx(5 / 15)

    def test_both_empty_rejected(self):
        empty = ShingleSet(frozenset())
        with pytest.raises(BothEmpty):
            exact_jaccard(empty, empty)


class TestCorpusIndex:
    def test_empty_corpus_scores_full_novelty(self):
        corpus = CorpusIndex(permutation_seed=42)
        assert novelty_score(shingle("anything at all goes here"), corpus) == 1.0

    def test_novelty_is_one_minus_best_similarity(self):
        corpus = CorpusIndex(permutation_seed=0)
        sig = signature(shingle("probe candidate text"), 0)
        near = MinHashSignature(
            sig.values[:77] + tuple(v + 1 for v in sig.values[77:]),
            permutation_seed=0,
        )
        far = MinHashSignature(
            tuple(v + 2 for v in sig.values), permutation_seed=0
        )
        corpus.add("low", far)
        corpus.add("high", near)
        best_id, best = corpus.best_match(sig)
        assert best_id == "high"
        assert best == pytest.approx(77 / 256)
        assert novelty_score(sig, corpus) == pytest.approx(1 - 77 / 256)

    def test_first_entry_wins_ties(self):
        corpus = CorpusIndex(permutation_seed=0)
        sig = signature(shingle("tie breaking probe entry"), 0)
        corpus.add("first", sig)
        corpus.add("second", sig)
        assert corpus.best_match(sig)[0] == "first"

    def test_duplicate_entry_id_rejected(self):
        corpus = CorpusIndex(permutation_seed=1)
        corpus.add_text("gen-0001-0001", "some admitted candidate body")
        with pytest.raises(DuplicateEntry):
            corpus.add_text("gen-0001-0001", "different text, same id")

    def test_family_mismatch_on_add(self):
        corpus = CorpusIndex(permutation_seed=1)
        with pytest.raises(FamilyMismatch):
            corpus.add("x", signature(shingle("mismatched family entry"), 2))

    def test_novelty_nonincreasing_as_corpus_grows(self):
        corpus = CorpusIndex(permutation_seed=8)
        probe = shingle("class Net(nn.Module): pass # probe")
        scores = [novelty_score(probe, corpus)]
        for i, text in enumerate(
            [
                "class Net(nn.Module): conv stack one",
                "class Net(nn.Module): pass # probe sibling",
                "class Net(nn.Module): pass # probe",
            ]
        ):
            corpus.add_text(f"e{i}", text)
            scores.append(novelty_score(probe, corpus))
        assert scores == sorted(scores, reverse=True)
        assert scores[0] == 1.0
        assert scores[-1] == 0.0

    def test_dump_load_round_trip(self, tmp_path):
        corpus = CorpusIndex(permutation_seed=42)
        corpus.add_text("gen-0000-0003", "first admitted body text")
        corpus.add_text("gen-0001-0017", "second admitted body text")
        path = tmp_path / "corpus.sig.jsonl"
        corpus.dump_jsonl(path)
        loaded = CorpusIndex.load_jsonl(path)
        assert loaded.permutation_seed == 42
        assert loaded.entries == corpus.entries

    def test_load_empty_file_uses_fallback_seed(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert CorpusIndex.load_jsonl(path, permutation_seed=7).permutation_seed == 7

    def test_load_checks_expected_seed(self, tmp_path):
        corpus = CorpusIndex(permutation_seed=1)
        corpus.add_text("e", "entry body for the seed check")
        path = tmp_path / "corpus.sig.jsonl"
        corpus.dump_jsonl(path)
        with pytest.raises(FamilyMismatch):
            CorpusIndex.load_jsonl(path, permutation_seed=2)


class TestAdmitNovel:
    def test_gate_is_inclusive(self):
        assert admit_novel(0.95)
        assert admit_novel(0.90)
        assert not admit_novel(0.899999)
        assert not admit_novel(0.10)

    def test_custom_threshold(self):
        assert admit_novel(0.5, tau_nov=0.5)
        assert not admit_novel(0.49, tau_nov=0.5)


@settings(max_examples=60, deadline=None)
@given(st.text(min_size=12, max_size=120), st.integers(0, 2**31))
def test_self_similarity_property(text, seed):
    s = shingle(text, normalized=False)
    if len(s) == 0:
        return
    sig = signature(s, seed)
    assert jaccard_estimate(sig, sig) == 1.0


@settings(max_examples=40, deadline=None)
@given(
    st.sets(st.text(min_size=10, max_size=10), min_size=1, max_size=40),
    st.sets(st.text(min_size=10, max_size=10), min_size=1, max_size=40),
    st.integers(0, 2**31),
)
def test_union_min_property(grams_a, grams_b, seed):
    sa = ShingleSet(frozenset(grams_a))
    sb = ShingleSet(frozenset(grams_b))
    union = ShingleSet(sa.shingles | sb.shingles)
    va = signature(sa, seed).values
    vb = signature(sb, seed).values
    assert signature(union, seed).values == tuple(
        min(x, y) for x, y in zip(va, vb)
    )
