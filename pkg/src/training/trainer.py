"""Adversarial phase: one surviving generator per round, selected from children
varied over the temperature x objective grid, against a discriminator that
is updated after every selection.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from src.data.parse import format_metric
from src.models.io import save_discriminator, save_generator
from src.training.evolution import (
    Individual,
    eval_f_obj,
    eval_f_temp,
    make_optimizer,
    mutation_directions,
    pooled_real_batch,
    select_stage_obj,
    select_stage_temp,
    update_discriminator,
    vary,
)
from src.training.schedule import TemperatureSchedule, schedule_tau
from src.utils.checkpoint import module_arrays, save_arrays
from src.utils.errors import ModelError, TrainingError
from src.utils.rng import FAKE_EVAL, GEN_DISC, GEN_VARY, REAL_EVAL, derive_seed, numpy_rng

logger = logging.getLogger(__name__)

ROUND_CHECKPOINT = "round_{:05d}"


@dataclass
class RoundResult:
    round: int
    tau: float
    survivor: Individual
    children: list
    stage_temp_survivors: list
    d_losses: list = field(default_factory=list)

    def record(self, step):
        direction = self.survivor.direction
        return {
            "phase": "adversarial",
            "round": self.round,
            "step": step,
            "tau": self.tau,
            "tau_chosen": self.survivor.tau,
            "objective_chosen": direction.objective.value,
            "temp_offset_chosen": direction.temp_index,
            "f_temp": self.survivor.f_temp,
            "f_obj": self.survivor.f_obj,
            "d_loss": float(np.mean(self.d_losses)) if self.d_losses else None,
            "children": [child.summary() for child in self.children],
            "stage_temp_survivors": [w.direction.label for w in self.stage_temp_survivors],
        }


def round_checkpoint_paths(checkpoint_dir, n):
    stem = ROUND_CHECKPOINT.format(n)
    checkpoint_dir = Path(checkpoint_dir)
    return checkpoint_dir / f"{stem}.gen.ckpt", checkpoint_dir / f"{stem}.disc.ckpt"


def latest_round(checkpoint_dir):
    """Highest round with both generator and discriminator checkpoints, or None."""
    rounds = []
    for path in Path(checkpoint_dir).glob("round_*.gen.ckpt"):
        try:
            n = int(path.name[len("round_"):].split(".", 1)[0])
        except ValueError:
            continue
        if round_checkpoint_paths(checkpoint_dir, n)[1].is_file():
            rounds.append(n)
    return max(rounds) if rounds else None


class AdversarialTrainer:
    """Runs rounds ``start_round + 1 .. cfg.adv_rounds``.

    ``on_record(record)`` receives every metrics-log record; ``metrics`` (a
    MetricsSuite) is evaluated on the survivor of every logged round.
    """

    def __init__(self, cfg, gen, disc, train_set, *, metrics=None, checkpoint_dir=None,
                 gen_optimizer_state=None, disc_optimizer=None, start_round=0,
                 schedule_shift=0, on_record=None, checkpoint_meta=None):
        self.cfg = cfg
        self.disc = disc
        self.train_set = train_set
        self.metrics = metrics
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.parent = Individual(gen, gen_optimizer_state)
        self.disc_optimizer = disc_optimizer or torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr)
        self.schedule = TemperatureSchedule(cfg.tau_tar, cfg.adv_rounds, start_round, schedule_shift)
        self.start_round = start_round
        self.directions = mutation_directions(cfg.temp_offsets, cfg.no_h, cfg.no_t, cfg.no_o)
        self.on_record = on_record
        self.checkpoint_meta = dict(checkpoint_meta or {})

    @property
    def gen(self):
        return self.parent.gen

    def _spawn(self, n):
        seed = derive_seed(self.cfg.seed, n, GEN_VARY)
        children = []
        for direction in self.directions:
            tau = schedule_tau(self.schedule, direction.temp_index)
            children.append(vary(self.parent, direction, tau, self.train_set, self.disc,
                                 self.cfg.gen_steps, self.cfg.gen_lr, self.cfg.batch_size, seed))
        return children

    def _evaluate(self, children, n):
        cfg = self.cfg
        real_ids = pooled_real_batch(self.train_set, cfg.batch_size, numpy_rng(cfg.seed, n, REAL_EVAL))
        fake_seed = derive_seed(cfg.seed, n, FAKE_EVAL)
        for child in children:
            if not child.valid:
                continue
            try:
                child.set_fitness("f_temp", eval_f_temp(child, self.disc, real_ids, cfg.eval_n, fake_seed))
            except ModelError as e:
                logger.warning("Child %s invalid during evaluation: %s", child.direction.label, e)
                child.valid = False
        winners = select_stage_temp(children)
        for winner in winners:
            winner.set_fitness(
                "f_obj", eval_f_obj(winner, self.disc, real_ids, cfg.eval_n, cfg.lambda_div, fake_seed)
            )
        return winners, select_stage_obj(winners)

    def run_round(self, n):
        cfg = self.cfg
        self.schedule.n = n
        # dropout in the discriminator draws from the global stream
        torch.manual_seed(derive_seed(cfg.seed, n, GEN_DISC))

        children = self._spawn(n)
        winners, survivor = self._evaluate(children, n)
        for child in children:
            logger.debug("round %d child %-10s tau=%.4f f_temp=%s f_obj=%s valid=%s", n,
                         child.direction.label, child.tau, child.f_temp, child.f_obj, child.valid)

        if cfg.persistent_tms:
            self.schedule.shift += survivor.direction.temp_index
        tau = schedule_tau(self.schedule)
        self.parent = survivor.as_parent()

        try:
            d_losses = update_discriminator(
                self.disc, self.disc_optimizer, survivor.gen, self.train_set, tau,
                cfg.batch_size, cfg.d_steps, derive_seed(cfg.seed, n, GEN_DISC),
            )
        except TrainingError:
            path = self.write_diagnostic(n)
            logger.error("Discriminator diverged in round %d; state written to %s", n, path)
            raise
        return RoundResult(n, tau, survivor, children, winners, d_losses)

    def write_diagnostic(self, n):
        if self.checkpoint_dir is None:
            return None
        arrays = module_arrays(self.gen, "gen/")
        arrays.update(module_arrays(self.disc, "disc/"))
        meta = dict(self.checkpoint_meta, round=n, schedule_shift=self.schedule.shift,
                    generator=self.gen.metadata(), discriminator=self.disc.metadata())
        return save_arrays(self.checkpoint_dir / f"diagnostic_round_{n:04d}.ckpt", arrays, meta)

    def save_checkpoint(self, n):
        gen_path, disc_path = round_checkpoint_paths(self.checkpoint_dir, n)
        meta = dict(self.checkpoint_meta, round=n, schedule_shift=self.schedule.shift,
                    tau_tar=self.cfg.tau_tar, adv_rounds=self.cfg.adv_rounds)
        gen_optimizer = make_optimizer(self.gen.parameters(), self.cfg.gen_lr, self.parent.optimizer_state)
        save_generator(gen_path, self.gen, gen_optimizer, **meta)
        save_discriminator(disc_path, self.disc, self.disc_optimizer, **meta)
        logger.debug("Checkpointed round %d to %s", n, gen_path.parent)
        return gen_path, disc_path

    def should_log(self, n):
        return n % self.cfg.log_every == 0 or n == self.cfg.adv_rounds

    def train(self, progress=False):
        cfg = self.cfg
        results = []
        rounds = range(self.start_round + 1, cfg.adv_rounds + 1)
        for n in tqdm(rounds, desc="adversarial", disable=not progress):
            result = self.run_round(n)
            results.append(result)
            d_loss = np.mean(result.d_losses) if result.d_losses else None
            logger.info(
                "round %d/%d: tau=%.4f chosen=%s f_obj=%.4f d_loss=%s",
                n, cfg.adv_rounds, result.tau, result.survivor.direction.label,
                result.survivor.f_obj, format_metric(d_loss),
            )
            if self.should_log(n):
                record = result.record(cfg.pretrain_epochs + n)
                if self.metrics is not None:
                    record.update(self.metrics.evaluate(self.gen, round=n).log_fields())
                if self.on_record is not None:
                    self.on_record(record)
            if self.checkpoint_dir is not None and (n % cfg.checkpoint_cadence == 0 or n == cfg.adv_rounds):
                self.save_checkpoint(n)
        return results


def train_adversarial(cfg, gen, disc, train_set, **kwargs):
    """Run the whole adversarial phase; returns the trainer (its ``gen`` is the final survivor)."""
    progress = kwargs.pop("progress", False)
    trainer = AdversarialTrainer(cfg, gen, disc, train_set, **kwargs)
    trainer.train(progress=progress)
    return trainer
