"""synth: draw a labelled synthetic corpus from per-category oracles."""

import logging
import sys
from dataclasses import dataclass

from src.data.corpus import LabeledDataset, Vocabulary, write_corpus
from src.metrics.scores import CategoryScores
from src.models.io import save_oracle
from src.models.oracle import OracleModel, init_oracle, oracle_nll, oracle_sample
from src.utils.errors import ConfigError
from src.utils.rng import derive_seed

logger = logging.getLogger(__name__)

TRAIN_SPLIT = 0
TEST_SPLIT = 1


@dataclass
class SynthResult:
    vocab: Vocabulary
    oracle: OracleModel
    train_set: LabeledDataset
    test_set: LabeledDataset
    entropy: CategoryScores


def draw_split(oracle, cfg, n, split, pad_id):
    parts = [
        oracle_sample(oracle, c, n, cfg.seq_len, derive_seed(cfg.data_seed, c, split), pad_id)
        for c in range(cfg.k)
    ]
    return LabeledDataset.concat(parts)


def cmd_synth(cfg, paths, out=None):
    """Write data/train_<c>.txt, data/test_<c>.txt, vocab.txt and oracle.ckpt.

    Prints the oracle's entropy estimate (its NLL on the test split), the
    ground-truth floor for NLL_oracle.
    """
    if not cfg.synthetic:
        raise ConfigError("synth needs mode: synthetic")
    out = out or sys.stdout

    vocab = Vocabulary.numbered(cfg.vocab_size)
    oracle = init_oracle(
        cfg.k, vocab.size, cfg.oracle_hidden, cfg.oracle_seed,
        start_id=vocab.bos_id, blocked_ids=vocab.reserved_ids, init_std=cfg.oracle_init_std,
    )
    train = draw_split(oracle, cfg, cfg.samples_per_category, TRAIN_SPLIT, vocab.pad_id)
    test = draw_split(oracle, cfg, cfg.test_samples_per_category, TEST_SPLIT, vocab.pad_id)

    write_corpus(train, vocab, paths.train_files(cfg.k))
    write_corpus(test, vocab, paths.test_files(cfg.k))
    vocab.save(paths.vocab)
    save_oracle(paths.oracle, oracle, vocab=list(vocab.tokens), seq_len=cfg.seq_len)

    entropy = oracle_nll(oracle, test.ids, test.labels)
    logger.info("Wrote %d training and %d test sequences to %s", len(train), len(test), paths.data_dir)
    for c, value in sorted(entropy.per_category.items()):
        out.write(f"category {c}: oracle entropy estimate {value:.4f} nats\n")
    out.write(f"harmonic: {entropy.harmonic:.4f} nats\n")
    return SynthResult(vocab, oracle, train, test, entropy)
