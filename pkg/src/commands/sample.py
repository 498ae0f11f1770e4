"""sample: decode sentences from a generator checkpoint."""

import logging
import sys
from pathlib import Path

from src.data.corpus import Vocabulary
from src.models.io import load_generator
from src.utils.errors import CheckpointError, ConfigError
from src.utils.rng import SAMPLE, torch_generator

logger = logging.getLogger(__name__)


def generator_with_vocab(checkpoint):
    loaded = load_generator(checkpoint)
    tokens = loaded.metadata.get("vocab")
    if not tokens:
        raise CheckpointError(f"{checkpoint} carries no vocabulary")
    return loaded, Vocabulary.from_tokens(tokens)


def sample_lines(gen, vocab, seq_len, categories, n, tau, seed):
    lines = []
    for c in categories:
        ids = gen.sample(c, n, seq_len, tau, torch_generator(seed, SAMPLE, c))
        for row in ids.tolist():
            text = " ".join(vocab.decode(row, strip_pad=True))
            lines.append(f"cat={c}\t{text}" if gen.k > 1 else text)
    return lines


def cmd_sample(checkpoint, category=None, n=10, tau=1.0, seed=0, output=None):
    """``n`` sentences per requested category (every category when ``category`` is None)."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not tau > 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    loaded, vocab = generator_with_vocab(checkpoint)
    gen = loaded.model
    if category is not None and not 0 <= category < gen.k:
        raise ConfigError(f"category {category} outside [0, {gen.k}) for {checkpoint}")
    seq_len = loaded.metadata.get("seq_len")
    if seq_len is None:
        raise CheckpointError(f"{checkpoint} does not record a sequence length")

    categories = range(gen.k) if category is None else [category]
    lines = sample_lines(gen, vocab, seq_len, categories, n, tau, seed)
    text = "".join(f"{line}\n" for line in lines)
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text, encoding="utf-8")
        logger.info("Wrote %d samples to %s", len(lines), output)
    return lines
