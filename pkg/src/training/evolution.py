"""Hierarchical evolutionary learning: variation over temperature x objective
directions, two-stage fitness evaluation and selection, and the discriminator
environment update.
"""

import copy
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from src.models.generator import RelationalMemoryGenerator
from src.training.objectives import (
    LogitBatchPair,
    Objective,
    d_loss_catra,
    generator_loss,
    relativistic_score,
)
from src.utils.errors import ModelError, ObjectiveError, SelectionError, TrainingError
from src.utils.rng import numpy_rng, torch_generator

logger = logging.getLogger(__name__)

GRAD_CLIP = 5.0


@dataclass(frozen=True)
class MutationDirection:
    temp_index: int
    objective: Objective

    @property
    def label(self):
        return f"{self.objective.value}@{self.temp_index:+d}"


def mutation_directions(temp_offsets=(-1, 0, 1), no_h=False, no_t=False, no_o=False):
    """The temperature x objective grid for one round (ablations shrink it)."""
    if no_h:
        return [MutationDirection(0, Objective.CATRA)]
    offsets = [0] if no_t else sorted(temp_offsets)
    objectives = [Objective.CATRA] if no_o else [Objective.CATRS, Objective.CATRA]
    return [MutationDirection(o, obj) for obj in objectives for o in offsets]


@dataclass
class Individual:
    gen: RelationalMemoryGenerator
    optimizer_state: Optional[dict] = None
    direction: Optional[MutationDirection] = None
    tau: Optional[float] = None
    f_temp: Optional[float] = None
    f_obj: Optional[float] = None
    valid: bool = True

    def set_fitness(self, name, value):
        if getattr(self, name) is not None:
            raise SelectionError(f"{name} already set for {self.direction.label}")
        setattr(self, name, float(value))

    def as_parent(self):
        """Fresh fitness slots for the next round; parameters are shared, not copied."""
        return Individual(self.gen, self.optimizer_state)

    def summary(self):
        return {
            "objective": self.direction.objective.value if self.direction else None,
            "temp_offset": self.direction.temp_index if self.direction else None,
            "tau": self.tau,
            "f_temp": self.f_temp,
            "f_obj": self.f_obj,
            "valid": self.valid,
        }


@contextmanager
def frozen(module):
    """Evaluation mode with gradients disabled for ``module``'s parameters."""
    was_training = module.training
    flags = [p.requires_grad for p in module.parameters()]
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    try:
        yield module
    finally:
        for p, flag in zip(module.parameters(), flags):
            p.requires_grad_(flag)
        module.train(was_training)


def make_optimizer(params, lr, state=None):
    optimizer = torch.optim.Adam(params, lr=lr)
    if state is not None:
        optimizer.load_state_dict(copy.deepcopy(state))
    return optimizer


def real_batch(dataset, category, n, rng):
    return torch.as_tensor(dataset.sample_category(category, n, rng), dtype=torch.long)


def category_pairs(gen, disc, dataset, tau, batch_size, rng, generator):
    """One real and one generated batch per category, scored by ``disc``."""
    pairs = []
    for c in range(gen.k):
        real = real_batch(dataset, c, batch_size, rng)
        fake = gen.generate(c, batch_size, dataset.seq_len, tau, generator)
        pairs.append(LogitBatchPair(disc(real), disc(fake.rows), c))
    return pairs, LogitBatchPair.union(pairs)


def vary(parent, direction, tau, dataset, disc, gen_steps, lr, batch_size, seed):
    """Asexual reproduction: a deep copy of the parent trained ``gen_steps`` steps
    on the direction's objective with fakes generated at ``tau``.

    Children of one round share ``seed`` so they see the same real batches and
    Gumbel noise. A non-finite loss or gradient marks the child invalid.
    """
    gen = copy.deepcopy(parent.gen)
    child = Individual(gen, parent.optimizer_state, direction, tau)
    if gen_steps == 0:
        return child

    optimizer = make_optimizer(gen.parameters(), lr, parent.optimizer_state)
    with frozen(disc):
        for step in range(gen_steps):
            rng = numpy_rng(seed, step)
            generator = torch_generator(seed, step)
            try:
                pairs, all_pair = category_pairs(gen, disc, dataset, tau, batch_size, rng, generator)
                loss = generator_loss(direction.objective, pairs, all_pair, gen.k)
            except ModelError as e:
                logger.warning("Child %s invalid: %s", direction.label, e)
                child.valid = False
                return child
            optimizer.zero_grad()
            loss.backward()
            grads = [p.grad for p in gen.parameters() if p.grad is not None]
            if not torch.isfinite(loss) or not all(torch.isfinite(g).all() for g in grads):
                logger.warning("Child %s invalid: non-finite loss or gradient", direction.label)
                child.valid = False
                return child
            torch.nn.utils.clip_grad_norm_(gen.parameters(), GRAD_CLIP)
            optimizer.step()
    child.optimizer_state = optimizer.state_dict()
    return child


@dataclass
class FitnessSample:
    real_logits: torch.Tensor
    fake_logits: torch.Tensor
    hard_ids: torch.Tensor
    categories: torch.Tensor


def split_evenly(n, k):
    return [n // k + (1 if c < n % k else 0) for c in range(k)]


@torch.no_grad()
def fitness_sample(child, disc, real_ids, eval_n, seed):
    """Score ``eval_n`` samples (spread evenly over categories) at the child's temperature."""
    if eval_n < 1:
        raise ObjectiveError(f"eval_n must be >= 1, got {eval_n}")
    if real_ids is None or len(real_ids) == 0:
        raise ObjectiveError("Fitness evaluation needs a non-empty real batch")
    gen = child.gen
    tau = child.tau if child.tau is not None else 1.0
    generator = torch_generator(seed)
    rows, hard, cats = [], [], []
    with frozen(disc):
        for c, n_c in enumerate(split_evenly(eval_n, gen.k)):
            if n_c == 0:
                continue
            batch = gen.generate(c, n_c, real_ids.shape[1], tau, generator)
            rows.append(batch.rows)
            hard.append(batch.hard_ids)
            cats.append(torch.full((n_c,), c, dtype=torch.long))
        return FitnessSample(disc(real_ids), disc(torch.cat(rows)), torch.cat(hard), torch.cat(cats))


def fitness_temp(real_logits, fake_logits):
    """Mean fake-side relativistic score."""
    pair = LogitBatchPair(real_logits, fake_logits)
    return float(relativistic_score(pair, "fake").mean())


def eval_f_temp(child, disc, real_ids, eval_n, seed):
    sample = fitness_sample(child, disc, real_ids, eval_n, seed)
    return fitness_temp(sample.real_logits, sample.fake_logits)


def eval_f_obj(child, disc, real_ids, eval_n, lam, seed):
    """F_temp plus lam * NLL_div of the same generated samples."""
    if lam < 0:
        raise ObjectiveError(f"lambda must be >= 0, got {lam}")
    sample = fitness_sample(child, disc, real_ids, eval_n, seed)
    quality = fitness_temp(sample.real_logits, sample.fake_logits)
    with torch.no_grad():
        nll = -child.gen.sequence_log_prob(sample.hard_ids, sample.categories).double().mean()
    return quality + lam * float(nll)


def select_stage_temp(children):
    """Per objective, the child with the largest f_temp (ties: lowest temperature offset)."""
    groups = {}
    for child in children:
        if not child.valid:
            continue
        if child.f_temp is None:
            raise SelectionError(f"Child {child.direction.label} has no f_temp")
        groups.setdefault(child.direction.objective, []).append(child)
    if not groups:
        raise SelectionError("Every child in the round is invalid")
    return [
        min(group, key=lambda ch: (-ch.f_temp, ch.direction.temp_index))
        for group in groups.values()
    ]


def select_stage_obj(winners):
    """The winner with the largest f_obj (ties: CatRa)."""
    missing = [w.direction.label for w in winners if w.f_obj is None]
    if missing:
        raise SelectionError(f"Stage-temp winners without f_obj: {missing}")
    return min(winners, key=lambda w: (-w.f_obj, w.direction.objective != Objective.CATRA))


def select_hierarchical(children):
    return select_stage_obj(select_stage_temp(children))


def update_discriminator(disc, optimizer, gen, dataset, tau, batch_size, steps, seed):
    """``steps`` Adam steps on the category-wise discriminator loss; returns the losses."""
    losses = []
    disc.train()
    for step in range(steps):
        rng = numpy_rng(seed, step)
        generator = torch_generator(seed, step)
        with torch.no_grad():
            fakes = [gen.generate(c, batch_size, dataset.seq_len, tau, generator).rows
                     for c in range(gen.k)]
        pairs = []
        for c, rows in enumerate(fakes):
            real = real_batch(dataset, c, batch_size, rng)
            pairs.append(LogitBatchPair(disc(real), disc(rows), c))
        loss = d_loss_catra(pairs, LogitBatchPair.union(pairs), gen.k)
        if not torch.isfinite(loss):
            raise TrainingError(f"Non-finite discriminator loss at step {step}: {loss.item()}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss))
    return losses


def pooled_real_batch(dataset, n, rng):
    """Real sequences drawn from all categories together."""
    pick = rng.choice(len(dataset), size=n, replace=n > len(dataset))
    return torch.as_tensor(np.asarray(dataset.ids)[pick], dtype=torch.long)
