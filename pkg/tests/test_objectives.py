import math

import numpy as np
import pytest
import torch

from src.training.objectives import (
    LogitBatchPair,
    d_loss_catra,
    g_loss_catra,
    g_loss_catrs,
    generator_loss,
    loss_ra,
    relativistic_score,
)
from src.utils.errors import ObjectiveError
from tests.helpers import seeded

LN2 = math.log(2)


def zero_pairs(k, n=4):
    pairs = [LogitBatchPair(torch.zeros(n, dtype=torch.float64), torch.zeros(n, dtype=torch.float64), c)
             for c in range(k)]
    return pairs, LogitBatchPair.union(pairs)


def random_pairs(k, n, seed, shift=0.0):
    g = seeded(seed)
    pairs = [
        LogitBatchPair(torch.randn(n, generator=g, dtype=torch.float64) * 3 + shift,
                       torch.randn(n, generator=g, dtype=torch.float64) * 3 + shift, c)
        for c in range(k)
    ]
    return pairs, LogitBatchPair.union(pairs)


class TestSymmetricDiscriminator:
    def test_single_pair(self):
        pairs, _ = zero_pairs(1)
        assert float(loss_ra(pairs[0])) == pytest.approx(2 * LN2)

    def test_catra_two_categories(self):
        pairs, all_pair = zero_pairs(2)
        assert float(d_loss_catra(pairs, all_pair, k=2)) == pytest.approx(6 * LN2)
        assert float(g_loss_catra(pairs, all_pair, k=2)) == pytest.approx(-6 * LN2)

    def test_catrs_two_categories(self):
        pairs, all_pair = zero_pairs(2)
        assert float(g_loss_catrs(pairs, all_pair, k=2)) == pytest.approx(3 * LN2)

    def test_relativistic_score_is_one_half(self):
        pairs, _ = zero_pairs(1)
        torch.testing.assert_close(relativistic_score(pairs[0], "fake"), torch.full((4,), 0.5, dtype=torch.float64))


class TestProperties:
    @pytest.mark.parametrize("seed", range(100))
    def test_generator_catra_is_negated_discriminator_loss(self, seed):
        pairs, all_pair = random_pairs(3, 5, seed)
        assert float(g_loss_catra(pairs, all_pair)) == -float(d_loss_catra(pairs, all_pair))

    @pytest.mark.parametrize("seed", range(100))
    def test_common_shift_leaves_losses_unchanged(self, seed):
        shift = float(np.random.default_rng(seed).uniform(-20, 20))
        base, base_all = random_pairs(2, 6, seed=seed)
        moved, moved_all = random_pairs(2, 6, seed=seed, shift=shift)
        for loss in (d_loss_catra, g_loss_catrs):
            assert abs(float(loss(base, base_all)) - float(loss(moved, moved_all))) < 1e-9

    def test_confident_discriminator_has_small_loss(self):
        pair = LogitBatchPair([10.0, 12.0], [-10.0, -11.0])
        assert float(loss_ra(pair)) < 1e-8

    def test_extreme_logits_stay_finite(self):
        pair = LogitBatchPair([-1e4], [1e4])
        assert torch.isfinite(loss_ra(pair))
        assert torch.isfinite(g_loss_catrs([pair], pair))


class TestValidation:
    def test_empty_batch(self):
        with pytest.raises(ObjectiveError, match="Empty"):
            LogitBatchPair(torch.zeros(0), torch.zeros(3), 1)

    def test_catrs_needs_equal_lengths(self):
        pair = LogitBatchPair(torch.zeros(3), torch.zeros(2), 0)
        with pytest.raises(ObjectiveError, match="index by index"):
            g_loss_catrs([pair], pair)

    def test_wrong_number_of_categories(self):
        pairs, all_pair = zero_pairs(2)
        with pytest.raises(ObjectiveError, match="Expected 3"):
            d_loss_catra(pairs, all_pair, k=3)

    def test_unknown_side(self):
        pairs, _ = zero_pairs(1)
        with pytest.raises(ObjectiveError, match="side"):
            relativistic_score(pairs[0], "both")

    @pytest.mark.parametrize("name", ["CatRS", "CatRa"])
    def test_generator_loss_dispatch_by_name(self, name):
        pairs, all_pair = zero_pairs(2)
        expected = 3 * LN2 if name == "CatRS" else -6 * LN2
        assert float(generator_loss(name, pairs, all_pair, k=2)) == pytest.approx(expected)
