"""Small models and datasets shared by the test modules."""

import logging
from contextlib import contextmanager

import numpy as np
import torch

from src.data.corpus import LabeledDataset
from src.models.discriminator import CNNDiscriminator
from src.models.generator import RelationalMemoryGenerator

# Settings small enough for a full synth, pretrain and train cycle in seconds.
SMOKE = {
    "mode": "synthetic",
    "k": 2,
    "seq_len": 4,
    "vocab_size": 4,
    "samples_per_category": 32,
    "test_samples_per_category": 16,
    "oracle_hidden": 8,
    "pretrain_epochs": 2,
    "pretrain_log_every": 1,
    "adv_rounds": 2,
    "d_steps": 1,
    "batch_size": 8,
    "eval_n": 8,
    "metric_samples": 16,
    "mem_dim": 8,
    "num_heads": 2,
    "emb_dim": 4,
    "cat_dim": 2,
    "disc_emb_dim": 4,
    "disc_filter_widths": [2, 3],
    "disc_num_filters": 3,
    "disc_hidden": 4,
}


def seeded(seed):
    g = torch.Generator()
    g.manual_seed(seed)
    return g


def tiny_generator(vocab_size=4, k=2, blocked_ids=(), bos_id=0, seed=0, **sizes):
    torch.manual_seed(seed)
    params = dict(emb_dim=2, cat_dim=1, mem_slots=1, mem_dim=4, num_heads=2)
    params.update(sizes)
    return RelationalMemoryGenerator(vocab_size, k, bos_id=bos_id, blocked_ids=blocked_ids, **params).double()


def tiny_discriminator(vocab_size=4, seq_len=3, seed=1):
    torch.manual_seed(seed)
    return CNNDiscriminator(vocab_size, seq_len, emb_dim=2, filter_widths=(2, 3), num_filters=2,
                            hidden=4).double()


def make_uniform(gen):
    """Zero read-out: every step's logits are equal, so the model is uniform over allowed ids."""
    with torch.no_grad():
        gen.output.weight.zero_()
        gen.output.bias.zero_()
    return gen


def random_dataset(n_per_category=20, k=2, seq_len=4, vocab_size=6, seed=0):
    rng = np.random.default_rng(seed)
    n = n_per_category * k
    ids = rng.integers(2, vocab_size, size=(n, seq_len))
    labels = np.repeat(np.arange(k), n_per_category)
    return LabeledDataset(ids, np.full(n, seq_len), labels, k, vocab_size)


@contextmanager
def restored_logging():
    """The CLI reconfigures the root logger; put handlers and level back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    try:
        yield
    finally:
        for handler in list(root.handlers):
            if handler not in handlers:
                root.removeHandler(handler)
                handler.close()
        for handler in handlers:
            if handler not in root.handlers:
                root.addHandler(handler)
        root.setLevel(level)
