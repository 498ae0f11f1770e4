"""Category-wise relativistic objectives.

Expectations are batch means over the same minibatch. The "all categories"
pair is the union of the per-category batches.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Union

import torch

from src.utils.errors import ObjectiveError

LOG_CLAMP = 1e-12


class Objective(str, Enum):
    CATRS = "CatRS"
    CATRA = "CatRa"


@dataclass
class LogitBatchPair:
    real_logits: torch.Tensor
    fake_logits: torch.Tensor
    category: Union[int, str] = "all"

    def __post_init__(self):
        # plain Python numbers are promoted to float64
        if not torch.is_tensor(self.real_logits):
            self.real_logits = torch.as_tensor(self.real_logits, dtype=torch.float64)
        self.real_logits = self.real_logits.reshape(-1)
        self.fake_logits = torch.as_tensor(self.fake_logits, dtype=self.real_logits.dtype).reshape(-1)
        if self.real_logits.numel() == 0 or self.fake_logits.numel() == 0:
            raise ObjectiveError(f"Empty logit batch for category {self.category}")

    @classmethod
    def union(cls, pairs):
        return cls(
            torch.cat([p.real_logits for p in pairs]),
            torch.cat([p.fake_logits for p in pairs]),
            "all",
        )


def _safe_log(x):
    return torch.log(x.clamp_min(LOG_CLAMP))


def relativistic_score(pair, side):
    """D-bar: sigmoid of each logit minus the opposite population's mean logit."""
    if side == "real":
        return torch.sigmoid(pair.real_logits - pair.fake_logits.mean())
    if side == "fake":
        return torch.sigmoid(pair.fake_logits - pair.real_logits.mean())
    raise ObjectiveError(f"side must be 'real' or 'fake', got {side!r}")


def loss_ra(pair):
    """-E[log D-bar(real)] - E[log(1 - D-bar(fake))]."""
    real = relativistic_score(pair, "real")
    # 1 - sigmoid(z) evaluated as sigmoid(-z)
    fake_complement = torch.sigmoid(pair.real_logits.mean() - pair.fake_logits)
    return -_safe_log(real).mean() - _safe_log(fake_complement).mean()


def _check_k(per_category, k):
    if k is not None and len(per_category) != k:
        raise ObjectiveError(f"Expected {k} category pairs, got {len(per_category)}")
    if not per_category:
        raise ObjectiveError("Need at least one category pair")


def d_loss_catra(per_category, all_pair, k=None):
    """Summed per-category relativistic loss plus the all-category term."""
    _check_k(per_category, k)
    total = loss_ra(per_category[0])
    for pair in per_category[1:]:
        total = total + loss_ra(pair)
    return total + loss_ra(all_pair)


def g_loss_catra(per_category, all_pair, k=None):
    return -d_loss_catra(per_category, all_pair, k)


def _pairwise_term(pair):
    if pair.real_logits.numel() != pair.fake_logits.numel():
        raise ObjectiveError(
            f"CatRS pairs fake and real samples index by index; category {pair.category} has "
            f"{pair.fake_logits.numel()} fake vs {pair.real_logits.numel()} real"
        )
    return -_safe_log(torch.sigmoid(pair.fake_logits - pair.real_logits)).mean()


def g_loss_catrs(per_category, all_pair, k=None):
    """-sum_c E[log sigmoid(D(fake_i) - D(real_i))] - same over all categories."""
    _check_k(per_category, k)
    total = _pairwise_term(per_category[0])
    for pair in per_category[1:]:
        total = total + _pairwise_term(pair)
    return total + _pairwise_term(all_pair)


GENERATOR_LOSSES = {
    Objective.CATRS: g_loss_catrs,
    Objective.CATRA: g_loss_catra,
}


def generator_loss(objective, per_category, all_pair, k=None):
    return GENERATOR_LOSSES[Objective(objective)](per_category, all_pair, k)
