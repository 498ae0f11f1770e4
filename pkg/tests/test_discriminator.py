import pytest
import torch
import torch.nn.functional as F

from src.models.discriminator import CNNDiscriminator
from src.utils.errors import ModelError
from tests.helpers import seeded, tiny_discriminator


class TestCNNDiscriminator:
    def test_one_logit_per_sequence(self, disc):
        ids = torch.randint(0, 4, (6, 3), generator=seeded(0))
        assert disc(ids).shape == (6,)

    def test_hard_ids_equal_one_hot_rows(self, disc):
        ids = torch.randint(0, 4, (5, 3), generator=seeded(1))
        rows = F.one_hot(ids, 4).double()
        torch.testing.assert_close(disc(ids), disc(rows))

    def test_relaxed_rows_are_differentiable(self, disc):
        rows = torch.softmax(torch.randn(3, 3, 4, generator=seeded(2), dtype=torch.float64), -1)
        rows.requires_grad_(True)
        disc(rows).sum().backward()
        assert rows.grad is not None and torch.isfinite(rows.grad).all()

    def test_filter_wider_than_sequence(self):
        with pytest.raises(ModelError, match="do not fit"):
            CNNDiscriminator(4, seq_len=3, filter_widths=(2, 5))

    def test_zero_parameters_give_zero_logits(self, disc):
        with torch.no_grad():
            for p in disc.parameters():
                p.zero_()
        ids = torch.randint(0, 4, (4, 3), generator=seeded(3))
        torch.testing.assert_close(disc(ids), torch.zeros(4, dtype=torch.float64))

    @pytest.mark.parametrize(
        "inputs, fragment",
        [
            (torch.zeros(2, 3, 5, dtype=torch.float64), "Relaxed input"),
            (torch.zeros(2, dtype=torch.long), "Hard input"),
            (torch.full((2, 3), 4, dtype=torch.long), "Token id"),
            ([[0, 1, 2]], "tensor or a SoftBatch"),
        ],
    )
    def test_rejects_bad_inputs(self, disc, inputs, fragment):
        with pytest.raises(ModelError, match=fragment):
            disc(inputs)

    def test_short_sequences(self):
        disc = tiny_discriminator(seq_len=3)
        with pytest.raises(ModelError, match="shorter than filter width"):
            disc(torch.zeros(2, 2, dtype=torch.long))

    def test_metadata_describes_shape(self, disc):
        meta = disc.metadata()
        assert meta["kind"] == "discriminator"
        assert meta["filter_widths"] == [2, 3]
        assert meta["seq_len"] == 3

    def test_batch_order_only_permutes_logits(self, disc):
        ids = torch.randint(0, 4, (7, 3), generator=seeded(4))
        order = torch.randperm(7, generator=seeded(5))
        torch.testing.assert_close(disc(ids[order]), disc(ids)[order])

    def test_relaxed_gradient_matches_finite_differences(self, disc):
        rows = torch.softmax(torch.randn(2, 3, 4, generator=seeded(6), dtype=torch.float64), -1)
        rows.requires_grad_(True)
        disc.eval()
        assert torch.autograd.gradcheck(disc, (rows,), eps=1e-6, atol=1e-6, rtol=1e-3)
