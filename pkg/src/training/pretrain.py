"""Maximum-likelihood warm-up for the generator and, optionally, the discriminator."""

import logging

import torch
from tqdm import tqdm

from src.data.corpus import batch_iter
from src.training.evolution import GRAD_CLIP, update_discriminator
from src.utils.errors import CorpusError, TrainingError
from src.utils.rng import GEN_DISC, MLE, derive_seed

logger = logging.getLogger(__name__)


def mle_pretrain(gen, data, epochs, lr, seed, batch_size=64, on_epoch=None, progress=False):
    """Teacher-forced, category-conditioned cross-entropy training of ``gen`` in place.

    Returns the per-epoch training NLL (nats per sequence, summed over steps).
    ``on_epoch(epoch, nll)`` runs after every epoch.
    """
    if len(data) == 0:
        raise CorpusError("MLE pretraining needs a non-empty dataset")
    if epochs < 0:
        raise TrainingError(f"epochs must be >= 0, got {epochs}")

    history = []
    if epochs == 0:
        return history

    optimizer = torch.optim.Adam(gen.parameters(), lr=lr)
    gen.train()
    for epoch in tqdm(range(1, epochs + 1), desc="pretrain", disable=not progress):
        total, count = 0.0, 0
        for ids, labels in batch_iter(data, batch_size, per_category=False,
                                      seed=derive_seed(seed, epoch, MLE)):
            ids = torch.as_tensor(ids, dtype=torch.long)
            step_lp = gen.step_log_probs(ids, torch.as_tensor(labels, dtype=torch.long))
            # per-token mean keeps the step size independent of the sequence length
            loss = -step_lp.mean()
            if not torch.isfinite(loss):
                raise TrainingError(f"Non-finite MLE loss in epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(gen.parameters(), GRAD_CLIP)
            optimizer.step()
            total += float(-step_lp.detach().sum(dim=1).double().sum())
            count += len(ids)
        nll = total / count
        history.append(nll)
        logger.debug("MLE epoch %d: nll=%.4f", epoch, nll)
        if on_epoch is not None:
            on_epoch(epoch, nll)
    return history


def pretrain_discriminator(disc, optimizer, gen, data, steps, batch_size, seed):
    """Warm the discriminator up on the category-wise loss with fakes at tau = 1."""
    if steps == 0:
        return []
    losses = update_discriminator(
        disc, optimizer, gen, data, tau=1.0, batch_size=batch_size, steps=steps,
        seed=derive_seed(seed, 0, GEN_DISC),
    )
    logger.info("Discriminator warm-up: %d steps, final loss %.4f", steps, losses[-1])
    return losses
