import math

import numpy as np
import pytest
import torch

from src.training.evolution import (
    Individual,
    MutationDirection,
    eval_f_obj,
    eval_f_temp,
    fitness_temp,
    frozen,
    mutation_directions,
    pooled_real_batch,
    select_hierarchical,
    select_stage_obj,
    select_stage_temp,
    split_evenly,
    update_discriminator,
    vary,
)
from src.training.objectives import Objective
from src.utils.errors import SelectionError, TrainingError
from tests.helpers import make_uniform, random_dataset, tiny_discriminator, tiny_generator

CATRS, CATRA = Objective.CATRS, Objective.CATRA


@pytest.fixture
def small_set():
    return random_dataset(n_per_category=10, k=2, seq_len=3, vocab_size=4)


@pytest.fixture
def zero_disc(disc):
    with torch.no_grad():
        for p in disc.parameters():
            p.zero_()
    return disc


def params_equal(a, b):
    return all(torch.equal(p, q) for p, q in zip(a.parameters(), b.parameters()))


def scored(objective, offset, f_temp, f_obj=None, valid=True):
    child = Individual(None, direction=MutationDirection(offset, objective), valid=valid)
    child.f_temp = f_temp
    child.f_obj = f_obj
    return child


class TestMutationDirections:
    @pytest.mark.parametrize(
        "flags, count",
        [({}, 6), ({"no_h": True}, 1), ({"no_t": True}, 2), ({"no_o": True}, 3),
         ({"no_t": True, "no_o": True}, 1)],
    )
    def test_grid_size(self, flags, count):
        assert len(mutation_directions(**flags)) == count

    def test_labels(self):
        labels = [d.label for d in mutation_directions()]
        assert labels == ["CatRS@-1", "CatRS@+0", "CatRS@+1", "CatRa@-1", "CatRa@+0", "CatRa@+1"]

    def test_single_child_without_hierarchy(self):
        assert mutation_directions(no_h=True) == [MutationDirection(0, CATRA)]


class TestVary:
    def test_zero_steps_copies_parent(self, gen, disc, small_set):
        parent = Individual(gen)
        child = vary(parent, MutationDirection(0, CATRA), 1.0, small_set, disc, 0, 1e-2, 4, seed=0)
        assert child.gen is not gen
        assert params_equal(child.gen, gen)
        assert child.tau == 1.0 and child.f_temp is None

    def test_parent_is_untouched_and_children_differ(self, gen, disc, small_set):
        before = {k: v.clone() for k, v in gen.state_dict().items()}
        parent = Individual(gen)
        children = [
            vary(parent, MutationDirection(0, obj), 2.0, small_set, disc, 3, 1e-2, 4, seed=7)
            for obj in (CATRS, CATRA)
        ]
        for k, v in gen.state_dict().items():
            assert torch.equal(v, before[k])
        assert all(c.valid for c in children)
        assert not params_equal(children[0].gen, children[1].gen)
        assert children[0].optimizer_state is not None

    def test_same_seed_same_child(self, gen, disc, small_set):
        parent = Individual(gen)
        a = vary(parent, MutationDirection(1, CATRS), 3.0, small_set, disc, 2, 1e-2, 4, seed=3)
        b = vary(parent, MutationDirection(1, CATRS), 3.0, small_set, disc, 2, 1e-2, 4, seed=3)
        assert params_equal(a.gen, b.gen)

    def test_discriminator_is_not_trained(self, gen, disc, small_set):
        before = [p.clone() for p in disc.parameters()]
        vary(Individual(gen), MutationDirection(0, CATRA), 1.0, small_set, disc, 2, 1e-2, 4, seed=0)
        assert all(torch.equal(p, q) for p, q in zip(disc.parameters(), before))
        assert all(p.requires_grad for p in disc.parameters())

    def test_non_finite_generator_marks_child_invalid(self, gen, disc, small_set):
        with torch.no_grad():
            gen.value.weight.fill_(float("nan"))
        child = vary(Individual(gen), MutationDirection(0, CATRA), 1.0, small_set, disc, 1, 1e-2, 4, seed=0)
        assert not child.valid


class TestFitness:
    def test_zero_discriminator_scores_one_half(self, gen, zero_disc, small_set):
        real = pooled_real_batch(small_set, 8, np.random.default_rng(0))
        child = Individual(gen, tau=1.0)
        assert eval_f_temp(child, zero_disc, real, eval_n=8, seed=0) == pytest.approx(0.5)

    def test_fitness_temp_from_logits(self):
        value = fitness_temp(torch.zeros(2), torch.full((2,), 2.0))
        assert value == pytest.approx(1 / (1 + math.exp(-2)))

    def test_zero_lambda_equals_quality(self, gen, disc, small_set):
        real = pooled_real_batch(small_set, 8, np.random.default_rng(1))
        child = Individual(gen, tau=2.0)
        f_temp = eval_f_temp(child, disc, real, eval_n=6, seed=4)
        assert eval_f_obj(child, disc, real, eval_n=6, lam=0.0, seed=4) == pytest.approx(f_temp)
        assert eval_f_obj(child, disc, real, eval_n=6, lam=1.0, seed=4) > f_temp

    def test_diversity_term_decides_between_equal_quality_children(self, zero_disc, small_set):
        real = pooled_real_batch(small_set, 8, np.random.default_rng(2))
        diverse = make_uniform(tiny_generator(vocab_size=4))
        collapsed = make_uniform(tiny_generator(vocab_size=4))
        with torch.no_grad():
            collapsed.output.bias[2] = 30.0
        children = [
            Individual(diverse, direction=MutationDirection(0, CATRS), tau=1.0),
            Individual(collapsed, direction=MutationDirection(0, CATRA), tau=1.0),
        ]
        for child in children:
            child.set_fitness("f_temp", eval_f_temp(child, zero_disc, real, eval_n=8, seed=0))
            child.set_fitness("f_obj", eval_f_obj(child, zero_disc, real, eval_n=8, lam=0.001, seed=0))
        assert children[0].f_temp == pytest.approx(children[1].f_temp)
        assert children[0].f_obj == pytest.approx(0.5 + 0.001 * 3 * math.log(4))
        assert children[1].f_obj == pytest.approx(0.5, abs=1e-6)
        assert select_stage_obj(children) is children[0]

    def test_samples_split_over_categories(self):
        assert split_evenly(7, 3) == [3, 2, 2]
        assert sum(split_evenly(8, 2)) == 8

    def test_fitness_is_set_once(self):
        child = Individual(None, direction=MutationDirection(0, CATRA))
        child.set_fitness("f_temp", 0.4)
        with pytest.raises(SelectionError, match="already set"):
            child.set_fitness("f_temp", 0.5)

    def test_frozen_restores_flags(self, disc):
        disc.train()
        with frozen(disc):
            assert not disc.training
            assert not any(p.requires_grad for p in disc.parameters())
        assert disc.training
        assert all(p.requires_grad for p in disc.parameters())


class TestSelection:
    def table(self):
        return [
            scored(CATRS, -1, 0.40, 0.90),
            scored(CATRS, 0, 0.55, 0.70),
            scored(CATRS, 1, 0.50, 0.95),
            scored(CATRA, -1, 0.60, 0.65),
            scored(CATRA, 0, 0.45, 0.99),
            scored(CATRA, 1, 0.60, 0.10),
        ]

    def test_stage_temp_keeps_best_per_objective(self):
        winners = select_stage_temp(self.table())
        assert sorted(w.direction.label for w in winners) == ["CatRS@+0", "CatRa@-1"]

    def test_stage_obj_uses_objective_fitness(self):
        assert select_hierarchical(self.table()).direction.label == "CatRS@+0"

    def test_all_ties(self):
        children = [scored(obj, o, 0.5, 0.5) for obj in (CATRS, CATRA) for o in (-1, 0, 1)]
        assert select_hierarchical(children).direction.label == "CatRa@-1"

    def test_invalid_children_are_skipped(self):
        children = self.table()
        children[1].valid = False
        winners = select_stage_temp(children)
        assert "CatRS@+1" in [w.direction.label for w in winners]

    def test_all_invalid(self):
        children = [scored(CATRA, 0, None, valid=False), scored(CATRS, 0, None, valid=False)]
        with pytest.raises(SelectionError, match="invalid"):
            select_stage_temp(children)

    def test_missing_objective_fitness(self):
        with pytest.raises(SelectionError, match="without f_obj"):
            select_stage_obj([scored(CATRA, 0, 0.5)])

    def test_one_child_is_selected_unchanged(self):
        only = scored(CATRA, 0, 0.3, 0.2)
        assert select_hierarchical([only]) is only


class TestDiscriminatorUpdate:
    def test_returns_one_loss_per_step(self, gen, disc, small_set):
        before = [p.clone() for p in disc.parameters()]
        optimizer = torch.optim.Adam(disc.parameters(), lr=1e-2)
        losses = update_discriminator(disc, optimizer, gen, small_set, 1.0, 4, steps=3, seed=0)
        assert len(losses) == 3 and all(np.isfinite(losses))
        assert not all(torch.equal(p, q) for p, q in zip(disc.parameters(), before))

    def test_non_finite_loss(self, gen, disc, small_set):
        with torch.no_grad():
            disc.out.bias.fill_(float("nan"))
        optimizer = torch.optim.Adam(disc.parameters(), lr=1e-2)
        with pytest.raises(TrainingError, match="Non-finite discriminator loss"):
            update_discriminator(disc, optimizer, gen, small_set, 1.0, 4, steps=1, seed=0)

    def test_pooled_batch_mixes_categories(self, small_set):
        batch = pooled_real_batch(small_set, 50, np.random.default_rng(0))
        assert batch.shape == (50, 3)
        assert batch.dtype == torch.long
