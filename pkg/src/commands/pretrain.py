"""pretrain: MLE warm-up of the generator (and optionally the discriminator)."""

import logging

import torch

from src.commands.common import blocked_ids, build_metrics, checkpoint_meta, load_experiment
from src.data.parse import format_metric
from src.metrics.report import MetricsLog
from src.models.discriminator import build_discriminator
from src.models.generator import build_generator
from src.models.io import save_discriminator, save_generator
from src.training.pretrain import mle_pretrain, pretrain_discriminator

logger = logging.getLogger(__name__)


def cmd_pretrain(cfg, paths, progress=False):
    experiment = load_experiment(cfg, paths)
    vocab = experiment.vocab

    torch.manual_seed(cfg.seed)
    gen = build_generator(cfg, vocab, blocked_ids(cfg, vocab))
    disc = build_discriminator(cfg, vocab)
    metrics = build_metrics(cfg, experiment)

    log = MetricsLog(paths.metrics)
    # a fresh pretraining invalidates everything logged before it
    log.truncate("pretrain", -1)
    log.truncate("adversarial", 0)

    def on_epoch(epoch, nll):
        if epoch % cfg.pretrain_log_every and epoch != cfg.pretrain_epochs:
            return
        record = {"phase": "pretrain", "epoch": epoch, "step": epoch, "mle_nll": nll}
        record.update(metrics.evaluate(gen, epoch=epoch).log_fields())
        log.append(record)
        logger.info("pretrain epoch %d/%d: mle_nll=%s", epoch, cfg.pretrain_epochs, format_metric(nll))

    on_epoch(0, None)
    history = mle_pretrain(gen, experiment.train_set, cfg.pretrain_epochs, cfg.pretrain_lr,
                           cfg.seed, cfg.batch_size, on_epoch=on_epoch, progress=progress)

    disc_optimizer = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr)
    pretrain_discriminator(disc, disc_optimizer, gen, experiment.train_set, cfg.d_pretrain_steps,
                           cfg.batch_size, cfg.seed)

    meta = checkpoint_meta(cfg, vocab)
    save_generator(paths.pretrain_gen, gen, round=0, epochs=cfg.pretrain_epochs, **meta)
    save_discriminator(paths.pretrain_disc, disc, disc_optimizer, round=0, **meta)
    logger.info("Saved pretrained models to %s", paths.checkpoints)
    return gen, disc, history
