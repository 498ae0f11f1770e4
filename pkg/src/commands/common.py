"""Run-directory layout and the pieces every subcommand needs: data, vocabulary,
oracle and the metric suite.
"""

import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from src.data.corpus import LabeledDataset, Vocabulary, build_vocab, load_labeled
from src.metrics.report import MetricsSuite
from src.models.io import load_oracle
from src.utils.config import save_config
from src.utils.errors import CatGANError, CheckpointError, ConfigError, CorpusError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def config(self):
        return self.root / "config.yaml"

    @property
    def run_log(self):
        return self.root / "run.log"

    @property
    def metrics(self):
        return self.root / "metrics.jsonl"

    @property
    def vocab(self):
        return self.root / "vocab.txt"

    @property
    def data_dir(self):
        return self.root / "data"

    @property
    def oracle(self):
        return self.root / "oracle.ckpt"

    @property
    def checkpoints(self):
        return self.root / "checkpoints"

    @property
    def pretrain_gen(self):
        return self.checkpoints / "pretrain_gen.ckpt"

    @property
    def pretrain_disc(self):
        return self.checkpoints / "pretrain_disc.ckpt"

    @property
    def eval_dir(self):
        return self.root / "eval"

    def train_files(self, k):
        return [self.data_dir / f"train_{c}.txt" for c in range(k)]

    def test_files(self, k):
        return [self.data_dir / f"test_{c}.txt" for c in range(k)]


def resolve_run_dir(cfg):
    if cfg.run_dir:
        return Path(cfg.run_dir)
    return Path(cfg.output_dir) / datetime.now().strftime("%Y%m%d-%H%M%S")


def run_dir_for_checkpoint(checkpoint):
    """The run directory a checkpoint lives in (``<run>/checkpoints/x.ckpt`` or ``<run>/x.ckpt``)."""
    parent = Path(checkpoint).resolve().parent
    return parent.parent if parent.name == "checkpoints" else parent


def attach_run_log(path):
    """Mirror root-logger records into ``path`` (once per path)."""
    root = logging.getLogger()
    path = Path(path).resolve()
    for handler in root.handlers:
        if isinstance(handler, logging.FileHandler) and Path(handler.baseFilename) == path:
            return handler
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    return handler


def open_run(cfg):
    """Create the run directory, store the resolved config and start run.log.

    Returns the (possibly updated) config and the run's paths.
    """
    root = resolve_run_dir(cfg)
    try:
        root.mkdir(parents=True, exist_ok=True)
        cfg = cfg.replace(run_dir=str(root))
        paths = RunPaths(root)
        save_config(cfg, paths.config)
    except OSError as e:
        raise CatGANError(f"Cannot write to run directory {root}: {e}") from e
    attach_run_log(paths.run_log)
    logger.info("Run directory: %s", root)
    return cfg, paths


def blocked_ids(cfg, vocab):
    """Output ids the generator may never emit.

    Synthetic sequences are never padded, so pad is blocked there as well as bos.
    """
    if cfg.synthetic:
        return vocab.reserved_ids
    return (vocab.bos_id,)


def checkpoint_meta(cfg, vocab):
    return {
        "mode": cfg.mode,
        "k": cfg.k,
        "seq_len": cfg.seq_len,
        "vocab": list(vocab.tokens),
        "vocab_digest": vocab.digest(),
    }


def check_compatible(metadata, cfg, vocab, path):
    expected = checkpoint_meta(cfg, vocab)
    for key in ("k", "seq_len", "vocab_digest"):
        if key in metadata and metadata[key] != expected[key]:
            raise CheckpointError(
                f"{path} was written for {key}={metadata[key]!r}, this run has {expected[key]!r}"
            )


@dataclass
class Experiment:
    vocab: Vocabulary
    train_set: LabeledDataset
    test_set: Optional[LabeledDataset] = None
    oracle: object = None


def _require_files(files, what):
    missing = [str(f) for f in files if not Path(f).is_file()]
    if missing:
        raise CorpusError(f"Missing {what}: {', '.join(missing)}")


def load_experiment(cfg, paths):
    """Vocabulary, train/test sets and (synthetic mode) the oracle of a run."""
    if cfg.synthetic:
        vocab = Vocabulary.numbered(cfg.vocab_size)
        _require_files(paths.train_files(cfg.k) + paths.test_files(cfg.k) + [paths.oracle],
                       "synthetic data (run the synth command first)")
        oracle = load_oracle(paths.oracle).model
        if oracle.k != cfg.k or oracle.vocab_size != vocab.size:
            raise ConfigError(
                f"Oracle in {paths.oracle} has k={oracle.k}, V={oracle.vocab_size}; "
                f"config asks for k={cfg.k}, V={vocab.size}"
            )
        train = load_labeled(paths.train_files(cfg.k), vocab, cfg.seq_len)
        test = load_labeled(paths.test_files(cfg.k), vocab, cfg.seq_len)
        return Experiment(vocab, train, test, oracle)

    _require_files(cfg.corpus_files + cfg.test_files, "corpus files")
    vocab = build_vocab(list(cfg.corpus_files) + list(cfg.test_files))
    vocab.save(paths.vocab)
    train = load_labeled(cfg.corpus_files, vocab, cfg.seq_len)
    test = load_labeled(cfg.test_files, vocab, cfg.seq_len) if cfg.test_files else None
    return Experiment(vocab, train, test)


def build_metrics(cfg, experiment):
    return MetricsSuite(
        k=cfg.k,
        seq_len=cfg.seq_len,
        n_samples=cfg.metric_samples,
        seed=cfg.seed,
        oracle=experiment.oracle,
        test_set=experiment.test_set,
        vocab=experiment.vocab,
        bleu_orders=() if cfg.synthetic or experiment.test_set is None else tuple(cfg.bleu_orders),
    )
