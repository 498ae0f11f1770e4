"""eval: the full metric suite for one generator checkpoint."""

import logging
import sys
from pathlib import Path

from src.commands.common import build_metrics, check_compatible, load_experiment
from src.metrics.report import write_report
from src.models.io import load_generator
from src.training.trainer import latest_round, round_checkpoint_paths
from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)


def default_checkpoint(paths):
    """The newest round checkpoint of a run, falling back to the pretrained generator."""
    n = latest_round(paths.checkpoints)
    if n is not None:
        return round_checkpoint_paths(paths.checkpoints, n)[0]
    if paths.pretrain_gen.is_file():
        return paths.pretrain_gen
    raise CheckpointError(f"No generator checkpoint under {paths.checkpoints}")


def cmd_eval(cfg, paths, checkpoint=None, out=None):
    checkpoint = Path(checkpoint) if checkpoint else default_checkpoint(paths)
    out = out or sys.stdout
    experiment = load_experiment(cfg, paths)
    loaded = load_generator(checkpoint)
    check_compatible(loaded.metadata, cfg, experiment.vocab, checkpoint)

    suite = build_metrics(cfg, experiment)
    report = suite.evaluate(loaded.model, checkpoint=str(checkpoint), round=loaded.metadata.get("round"))
    report.check_consistency()
    jsonl, text = write_report(report, paths.eval_dir)
    logger.info("Wrote %s and %s", jsonl, text)
    out.write(report.to_text() + "\n")
    return report
