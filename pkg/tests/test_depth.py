import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepck.backends import (
    BigramBackend,
    ContextOverflowError,
    WordVocab,
    chain_backend,
    uniform_backend,
)
from deepck.depth import (
    DEEP_RANK_THRESHOLD,
    SCORE_CSV_HEADER,
    DepthScore,
    UndefinedCorrelationError,
    bin_statistics,
    depth_distribution,
    depth_rank,
    distribution_ranges,
    is_deep,
    pearson,
    perplexity,
    read_annotation_file,
    read_scores_csv,
    relation_depth_profile,
    score_triple,
    score_triples,
    write_scores_csv,
)
from deepck.triples import LabeledTriple

from oracles import brute_force_depth_rank


class TestDepthRank:
    def test_uniform_backend_ranks_by_token_id(self, toy_uniform, apple_triple):
        # every tail token ties, so "red" (id 2) lands at rank 3
        assert depth_rank(apple_triple, toy_uniform) == 3.0

    def test_chain_backend_gives_rank_one(self, toy_vocab):
        backend = chain_backend(toy_vocab, [["apple", "is", "red"]])
        assert depth_rank(LabeledTriple("apple", "Is", "red"), backend) == 1.0

    def test_matches_full_sort_oracle_on_bigram(self, toy_bigram, apple_triple):
        oracle = brute_force_depth_rank(apple_triple, toy_bigram)
        assert depth_rank(apple_triple, toy_bigram) == oracle

    def test_multi_token_tail_averages_positions(self, toy_vocab):
        backend = chain_backend(toy_vocab, [["whale", "at", "location", "ocean"]])
        triple = LabeledTriple("whale", "AtLocation", "ocean")
        # rendered: "whale at location ocean", tail is the last token only
        assert depth_rank(triple, backend) == 1.0

    def test_context_overflow_propagates(self, toy_vocab, apple_triple):
        backend = uniform_backend(toy_vocab, context_window=2)
        with pytest.raises(ContextOverflowError):
            depth_rank(apple_triple, backend)

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_oracle_agreement_on_random_tables(self, seed):
        rng = np.random.default_rng(seed)
        words = ["w%d" % i for i in range(8)]
        vocab = WordVocab(words)
        rows = {}
        for prev in range(len(vocab)):
            mass = rng.dirichlet(np.ones(4)) * 0.9
            toks = rng.choice(len(vocab), size=4, replace=False)
            rows[int(prev)] = {int(t): float(m) for t, m in zip(toks, mass)}
        backend = BigramBackend(vocab, rows=rows)
        triple = LabeledTriple(words[0], "RelatedTo", f"{words[3]} {words[5]}")
        assert depth_rank(triple, backend) == brute_force_depth_rank(triple, backend)


class TestPerplexity:
    def test_uniform_equals_vocab_size(self, toy_uniform, toy_vocab, apple_triple):
        assert perplexity(apple_triple, toy_uniform) == pytest.approx(len(toy_vocab), abs=1e-9)

    def test_deterministic_chain_is_exactly_one(self, toy_vocab):
        backend = chain_backend(toy_vocab, [["apple", "is", "red"]])
        assert perplexity(LabeledTriple("apple", "Is", "red"), backend) == 1.0

    def test_hand_computed_bigram_value(self, toy_vocab):
        backend = BigramBackend(
            toy_vocab,
            rows={0: {1: 0.5}, 1: {2: 0.25}},
            start_row={0: 0.8},
        )
        expect = (0.8 * 0.5 * 0.25) ** (-1 / 3)
        got = perplexity(LabeledTriple("apple", "Is", "red"), backend)
        assert got == pytest.approx(expect, rel=1e-12)

    def test_zero_probability_token_gives_inf(self, toy_vocab, caplog):
        backend = chain_backend(toy_vocab, [["apple", "is", "green"]])
        with caplog.at_level("WARNING"):
            value = perplexity(LabeledTriple("apple", "Is", "red"), backend)
        assert value == math.inf
        assert any("probability" in r.message for r in caplog.records)


class TestScoring:
    def test_score_triple_carries_backend_name(self, toy_uniform, apple_triple):
        score = score_triple(apple_triple, toy_uniform)
        assert score.backend_name == "toy-uniform"
        assert score.triple is apple_triple

    def test_score_triples_preserves_order(self, toy_uniform):
        triples = [LabeledTriple("apple", "Is", "red"),
                   LabeledTriple("whale", "AtLocation", "ocean")]
        scores = score_triples(triples, toy_uniform)
        assert [s.triple for s in scores] == triples

    def test_is_deep_is_strict(self):
        assert not is_deep(make_score(DEEP_RANK_THRESHOLD))
        assert is_deep(make_score(DEEP_RANK_THRESHOLD + 1e-9))
        assert not is_deep(make_score(12.0))
        assert is_deep(make_score(3000.0), threshold=100.0)


def make_score(rank, ppl=10.0, head="h", tail="t"):
    return DepthScore(LabeledTriple(head, "RelatedTo", tail), rank, ppl, "toy")


class TestBins:
    def test_hand_example(self):
        # ranks {1,1,2,2,3,4} over 3 equal-count bins
        scores = [make_score(r, head="h%d" % i) for i, r in enumerate([1, 1, 2, 2, 3, 4])]
        bins = bin_statistics(scores, {}, metric="depth_rank", num_bins=3)
        assert [b.mean_metric for b in bins] == [1.0, 2.0, 3.5]
        assert [b.member_count for b in bins] == [2, 2, 2]

    def test_annotated_depth_means(self):
        scores = [make_score(r, head="h%d" % i) for i, r in enumerate([1, 2, 3, 4])]
        ann = {s.triple.key(): float(i) for i, s in enumerate(scores)}
        bins = bin_statistics(scores, ann, metric="depth_rank", num_bins=2)
        assert bins[0].mean_annotated_depth == pytest.approx(0.5)
        assert bins[1].mean_annotated_depth == pytest.approx(2.5)

    @given(st.lists(st.floats(1, 1e4, allow_nan=False), min_size=4, max_size=40),
           st.integers(1, 4))
    def test_bins_partition_the_scores(self, ranks, num_bins):
        scores = [make_score(r, head="h%d" % i) for i, r in enumerate(ranks)]
        bins = bin_statistics(scores, {}, metric="depth_rank", num_bins=num_bins)
        assert sum(b.member_count for b in bins) == len(scores)
        assert len(bins) == num_bins


class TestPearson:
    def test_hand_example(self):
        assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_perfect_and_inverse(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)

    def test_constant_input_is_undefined(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])

    @given(st.lists(st.integers(-100, 100), min_size=3, max_size=20, unique=True),
           st.floats(0.5, 4), st.floats(-10, 10))
    def test_affine_transform_preserves_magnitude(self, xs, a, b):
        ys = [a * x + b for x in xs]
        assert pearson(xs, ys) == pytest.approx(1.0, abs=1e-6)


class TestRelationProfile:
    def test_mean_and_stddev(self):
        scores = [make_score(100.0, head="a"), make_score(300.0, head="b")]
        profiles = relation_depth_profile(scores)
        assert len(profiles) == 1
        p = profiles[0]
        assert p.relation == "RelatedTo"
        assert p.mean_depth_rank == pytest.approx(200.0)
        assert p.stddev_depth_rank == pytest.approx(100.0)
        assert p.count == 2

    def test_single_member_has_zero_spread(self):
        (p,) = relation_depth_profile([make_score(5.0)])
        assert p.stddev_depth_rank == 0.0


class TestDistribution:
    def test_ranges_bracket_with_infinities(self):
        ranges = distribution_ranges([1000.0, 2000.0])
        assert ranges == [(-math.inf, 1000.0), (1000.0, 2000.0), (2000.0, math.inf)]

    def test_non_increasing_edges_rejected(self):
        with pytest.raises(ValueError):
            distribution_ranges([2000.0, 1000.0])

    def test_hand_example(self):
        scores = [make_score(r, head="h%d" % i)
                  for i, r in enumerate([500.0, 1500.0, 2500.0, 3500.0])]
        dist = depth_distribution(scores, [1000.0, 2000.0, 3000.0])
        assert dist == [0.25, 0.25, 0.25, 0.25]

    def test_edge_value_falls_in_upper_range(self):
        dist = depth_distribution([make_score(1000.0)], [1000.0])
        assert dist == [0.0, 1.0]

    @given(st.lists(st.floats(1, 5000, allow_nan=False), min_size=1, max_size=30))
    def test_fractions_sum_to_one(self, ranks):
        scores = [make_score(r, head="h%d" % i) for i, r in enumerate(ranks)]
        dist = depth_distribution(scores, [1000.0, 2500.0])
        assert sum(dist) == pytest.approx(1.0)


class TestScoreFiles:
    def test_roundtrip_is_byte_stable(self, tmp_path):
        scores = [make_score(3.0, ppl=14.000000000000002, head="apple", tail="red"),
                  make_score(math.inf, ppl=math.inf, head="whale", tail="ocean")]
        path = tmp_path / "scores.csv"
        write_scores_csv(path, scores)
        first = path.read_bytes()
        loaded = read_scores_csv(path)
        assert loaded[0].depth_rank == 3.0
        assert loaded[0].perplexity == 14.000000000000002
        assert loaded[1].depth_rank == math.inf
        write_scores_csv(path, loaded)
        assert path.read_bytes() == first

    def test_header(self, tmp_path):
        path = tmp_path / "scores.csv"
        write_scores_csv(path, [make_score(1.0)])
        header = path.read_text().splitlines()[0]
        assert header.split(",") == list(SCORE_CSV_HEADER)

    def test_annotation_file(self, tmp_path):
        path = tmp_path / "ann.tsv"
        path.write_text("# depth annotations\napple\tIs\tred\t3.5\nWhale\tAtLocation\tocean\t2.0\n")
        ann = read_annotation_file(path)
        assert ann[LabeledTriple("apple", "Is", "red").key()] == 3.5
        assert ann[LabeledTriple("whale", "atlocation", "ocean").key()] == 2.0

    def test_annotation_grade_bounds(self, tmp_path):
        path = tmp_path / "ann.tsv"
        path.write_text("apple\tIs\tred\t4.5\n")
        with pytest.raises(ValueError):
            read_annotation_file(path)
