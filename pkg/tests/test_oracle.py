import itertools
import math
import warnings

import numpy as np
import pytest
import torch

from src.models.oracle import init_oracle, oracle_nll, oracle_sample, sequence_log_probs
from src.utils.errors import ModelError
from tests.helpers import random_dataset


@pytest.fixture
def oracle():
    return init_oracle(k=2, vocab_size=4, hidden_size=6, seed=5)


def all_sequences(vocab_size, seq_len):
    return np.array(list(itertools.product(range(vocab_size), repeat=seq_len)))


class TestInit:
    def test_same_seed_same_weights(self):
        a = init_oracle(2, 5, 4, seed=9)
        b = init_oracle(2, 5, 4, seed=9)
        for pa, pb in zip(a.parameters(), b.parameters()):
            torch.testing.assert_close(pa, pb)

    def test_categories_differ(self, oracle):
        w0 = oracle.categories[0].output.weight
        w1 = oracle.categories[1].output.weight
        assert not torch.equal(w0, w1)

    def test_frozen(self, oracle):
        assert not any(p.requires_grad for p in oracle.parameters())

    @pytest.mark.parametrize("k, vocab_size", [(0, 4), (1, 1)])
    def test_rejects_degenerate_sizes(self, k, vocab_size):
        with pytest.raises(ModelError):
            init_oracle(k, vocab_size, 4, seed=0)


class TestSample:
    def test_shapes_and_labels(self, oracle):
        data = oracle_sample(oracle, 1, n=30, seq_len=5, seed=0)
        assert data.ids.shape == (30, 5)
        assert (data.labels == 1).all()
        assert data.ids.max() < 4

    def test_deterministic(self, oracle):
        a = oracle_sample(oracle, 0, n=20, seq_len=4, seed=3)
        b = oracle_sample(oracle, 0, n=20, seq_len=4, seed=3)
        np.testing.assert_array_equal(a.ids, b.ids)

    def test_zero_samples(self, oracle):
        assert oracle_sample(oracle, 0, n=0, seq_len=4, seed=0).ids.shape == (0, 4)

    def test_blocked_ids_never_appear(self):
        model = init_oracle(1, 5, 4, seed=1, start_id=1, blocked_ids=(0, 1))
        data = oracle_sample(model, 0, n=500, seq_len=6, seed=2)
        assert data.ids.min() >= 2

    def test_bad_category(self, oracle):
        with pytest.raises(ModelError, match="outside"):
            oracle_sample(oracle, 2, n=1, seq_len=3, seed=0)


class TestLikelihood:
    def test_probabilities_sum_to_one(self, oracle):
        seqs = all_sequences(4, 3)
        for c in range(2):
            lp = sequence_log_probs(oracle, seqs, np.full(len(seqs), c))
            assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-5)

    def test_sample_frequencies_match_probabilities(self, oracle):
        seqs = all_sequences(4, 2)
        probs = np.exp(sequence_log_probs(oracle, seqs, np.zeros(len(seqs), dtype=int)))
        data = oracle_sample(oracle, 0, n=40_000, seq_len=2, seed=1)
        codes = data.ids[:, 0] * 4 + data.ids[:, 1]
        freq = np.bincount(codes, minlength=16) / len(codes)
        assert 0.5 * np.abs(freq - probs).sum() < 0.02

    def test_uniform_oracle(self):
        model = init_oracle(1, 8, 4, seed=0)
        for p in model.categories[0].output.parameters():
            p.data.zero_()
        scores = oracle_nll(model, np.zeros((3, 4), dtype=int), [0, 0, 0])
        assert scores.per_category[0] == pytest.approx(4 * math.log(8))

    def test_label_out_of_range(self, oracle):
        with pytest.raises(ModelError, match="Label 2"):
            oracle_nll(oracle, np.zeros((1, 3), dtype=int), [2])

    def test_per_category_and_harmonic(self, oracle):
        ids = np.array([[0, 1, 2], [1, 1, 1], [3, 2, 0]])
        labels = np.array([0, 1, 1])
        lp = sequence_log_probs(oracle, ids, labels)
        scores = oracle_nll(oracle, ids, labels)
        assert scores.per_category[0] == pytest.approx(-lp[0])
        assert scores.per_category[1] == pytest.approx(-lp[1:].mean())
        assert scores.counts == {0: 1, 1: 2}
        a, b = scores.per_category[0], scores.per_category[1]
        assert scores.harmonic == pytest.approx(2 / (1 / a + 1 / b))

    def test_sequence_order_does_not_matter(self, oracle):
        rng = np.random.default_rng(4)
        ids = rng.integers(0, 4, size=(12, 3))
        labels = np.repeat([0, 1], 6)
        order = rng.permutation(12)
        a = oracle_nll(oracle, ids, labels)
        b = oracle_nll(oracle, ids[order], labels[order])
        for c in (0, 1):
            assert b.per_category[c] == pytest.approx(a.per_category[c], rel=1e-6)
        assert b.counts == a.counts

    def test_read_only_dataset_arrays(self, oracle):
        data = random_dataset(n_per_category=3, k=2, seq_len=3, vocab_size=4)
        assert not data.ids.flags.writeable
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            scores = oracle_nll(oracle, data.ids, data.labels)
        assert scores.counts == {0: 3, 1: 3}
