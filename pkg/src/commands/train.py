"""train: the adversarial phase, from the pretrained models or the latest round checkpoint."""

import logging

import torch

from src.commands.common import build_metrics, check_compatible, checkpoint_meta, load_experiment
from src.metrics.report import MetricsLog
from src.models.io import load_discriminator, load_generator
from src.training.trainer import latest_round, round_checkpoint_paths, train_adversarial
from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)


def starting_point(paths, resume):
    """(round, generator checkpoint, discriminator checkpoint) to continue from."""
    if resume:
        n = latest_round(paths.checkpoints)
        if n is None:
            raise CheckpointError(
                f"Nothing to resume: expected {paths.checkpoints / 'round_XXXXX.gen.ckpt'} "
                "and its .disc.ckpt pair"
            )
        gen_path, disc_path = round_checkpoint_paths(paths.checkpoints, n)
    else:
        n, gen_path, disc_path = 0, paths.pretrain_gen, paths.pretrain_disc
    for path in (gen_path, disc_path):
        if not path.is_file():
            raise CheckpointError(f"Missing checkpoint: expected {path}")
    return n, gen_path, disc_path


def cmd_train(cfg, paths, resume=False, progress=False):
    experiment = load_experiment(cfg, paths)
    start, gen_path, disc_path = starting_point(paths, resume)

    loaded_gen = load_generator(gen_path)
    loaded_disc = load_discriminator(disc_path)
    for loaded, path in ((loaded_gen, gen_path), (loaded_disc, disc_path)):
        check_compatible(loaded.metadata, cfg, experiment.vocab, path)
    gen, disc = loaded_gen.model, loaded_disc.model

    gen_state = None
    if resume and loaded_gen.has_optimizer:
        gen_optimizer = torch.optim.Adam(gen.parameters(), lr=cfg.gen_lr)
        gen_state = loaded_gen.restore_optimizer(gen_optimizer).state_dict()
    disc_optimizer = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr)
    if loaded_disc.has_optimizer:
        loaded_disc.restore_optimizer(disc_optimizer)

    log = MetricsLog(paths.metrics)
    log.truncate("adversarial", start)
    if start >= cfg.adv_rounds:
        logger.info("All %d rounds already done in %s", cfg.adv_rounds, paths.root)
        return None
    logger.info("Adversarial training from round %d (%s)", start + 1, gen_path.name)

    return train_adversarial(
        cfg, gen, disc, experiment.train_set,
        metrics=build_metrics(cfg, experiment),
        checkpoint_dir=paths.checkpoints,
        gen_optimizer_state=gen_state,
        disc_optimizer=disc_optimizer,
        start_round=start,
        schedule_shift=loaded_gen.metadata.get("schedule_shift", 0) if resume else 0,
        on_record=log.append,
        checkpoint_meta=checkpoint_meta(cfg, experiment.vocab),
        progress=progress,
    )
