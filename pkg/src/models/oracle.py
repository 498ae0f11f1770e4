"""Frozen, randomly initialised per-category LSTM language models.

They define the ground-truth distribution of the synthetic benchmark: they
generate the training data and give exact sequence likelihoods for NLL_oracle.
"""

import logging

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.data.corpus import LabeledDataset
from src.metrics.scores import CategoryScores
from src.utils.errors import ModelError

logger = logging.getLogger(__name__)

_CHUNK = 8192


class OracleLSTM(nn.Module):
    """Single-layer LSTM language model for one category."""

    def __init__(self, vocab_size, hidden_size, start_id=0, blocked_ids=()):
        super().__init__()
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.start_id = start_id
        self.embedding = nn.Embedding(vocab_size, hidden_size)
        self.cell = nn.LSTMCell(hidden_size, hidden_size)
        self.output = nn.Linear(hidden_size, vocab_size)
        mask = torch.zeros(vocab_size, dtype=torch.bool)
        mask[list(blocked_ids)] = True
        self.register_buffer("blocked", mask, persistent=False)

    def reset_parameters_normal(self, std, generator):
        with torch.no_grad():
            for p in self.parameters():
                p.normal_(0.0, std, generator=generator)

    def init_state(self, n):
        dtype = self.output.weight.dtype
        zeros = torch.zeros(n, self.hidden_size, dtype=dtype)
        return zeros, zeros.clone()

    def step(self, ids, state):
        h, c = self.cell(self.embedding(ids), state)
        logits = self.output(h).masked_fill(self.blocked, float("-inf"))
        return logits, (h, c)

    def log_prob(self, ids):
        """Per-sequence log-probability (summed over steps) of an (N, T) id tensor."""
        n, seq_len = ids.shape
        state = self.init_state(n)
        inp = torch.full((n,), self.start_id, dtype=torch.long)
        total = torch.zeros(n, dtype=self.output.weight.dtype)
        for t in range(seq_len):
            logits, state = self.step(inp, state)
            total = total + F.log_softmax(logits, dim=-1).gather(1, ids[:, t : t + 1]).squeeze(1)
            inp = ids[:, t]
        return total

    def sample(self, n, seq_len, generator):
        state = self.init_state(n)
        inp = torch.full((n,), self.start_id, dtype=torch.long)
        out = torch.empty(n, seq_len, dtype=torch.long)
        for t in range(seq_len):
            logits, state = self.step(inp, state)
            probs = F.softmax(logits, dim=-1)
            inp = torch.multinomial(probs, 1, generator=generator).squeeze(1)
            out[:, t] = inp
        return out


class OracleModel(nn.Module):
    """``k`` independent frozen oracles, one per category."""

    def __init__(self, k, vocab_size, hidden_size, seed, start_id=0, blocked_ids=(), init_std=1.0):
        super().__init__()
        if k < 1:
            raise ModelError(f"k must be >= 1, got {k}")
        if vocab_size < 2:
            raise ModelError(f"vocab_size must be >= 2, got {vocab_size}")
        if len(set(blocked_ids)) >= vocab_size:
            raise ModelError("Every token is blocked; the oracle would have empty support")
        self.k = k
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.seed = seed
        self.start_id = start_id
        self.blocked_ids = tuple(int(i) for i in blocked_ids)
        self.init_std = init_std
        self.categories = nn.ModuleList(
            OracleLSTM(vocab_size, hidden_size, start_id, blocked_ids) for _ in range(k)
        )

    def freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()
        return self

    def check_category(self, category):
        if not 0 <= int(category) < self.k:
            raise ModelError(f"Category {category} outside [0, {self.k})")

    def metadata(self):
        return {
            "kind": "oracle",
            "k": self.k,
            "vocab_size": self.vocab_size,
            "hidden_size": self.hidden_size,
            "seed": self.seed,
            "start_id": self.start_id,
            "blocked_ids": list(self.blocked_ids),
            "init_std": self.init_std,
        }


def init_oracle(k, vocab_size, hidden_size, seed, start_id=0, blocked_ids=(), init_std=1.0):
    """Draw every oracle weight from N(0, init_std^2) with a single seeded stream."""
    model = OracleModel(k, vocab_size, hidden_size, seed, start_id, blocked_ids, init_std)
    generator = torch.Generator()
    generator.manual_seed(seed)
    for oracle in model.categories:
        oracle.reset_parameters_normal(init_std, generator)
    logger.info("Initialised %d oracle(s): V=%d, hidden=%d, seed=%d", k, vocab_size, hidden_size, seed)
    return model.freeze()


@torch.no_grad()
def oracle_sample(model, category, n, seq_len, seed, pad_id=0):
    """Ancestral sampling of ``n`` length-``seq_len`` sequences from one category's oracle."""
    model.check_category(category)
    generator = torch.Generator()
    generator.manual_seed(seed)
    chunks = []
    remaining = n
    while remaining > 0:
        size = min(_CHUNK, remaining)
        chunks.append(model.categories[category].sample(size, seq_len, generator))
        remaining -= size
    ids = torch.cat(chunks).numpy() if chunks else np.zeros((0, seq_len), dtype=np.int64)
    return LabeledDataset(
        ids,
        np.full(n, seq_len, dtype=np.int64),
        np.full(n, category, dtype=np.int64),
        model.k,
        model.vocab_size,
        pad_id,
    )


@torch.no_grad()
def sequence_log_probs(model, ids, labels):
    """Per-sequence oracle log-probabilities under each sequence's own category."""
    ids = torch.as_tensor(np.array(ids), dtype=torch.long)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= model.k):
        bad = labels[(labels < 0) | (labels >= model.k)][0]
        raise ModelError(f"Label {bad} outside [0, {model.k})")
    if ids.numel() and (ids.min() < 0 or ids.max() >= model.vocab_size):
        raise ModelError(f"Token ids must lie in [0, {model.vocab_size})")

    out = np.zeros(len(labels), dtype=np.float64)
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        for lo in range(0, len(rows), _CHUNK):
            part = rows[lo : lo + _CHUNK]
            lp = model.categories[int(c)].log_prob(ids[torch.from_numpy(part)])
            out[part] = lp.double().numpy()
    return out


def oracle_nll(model, ids, labels):
    """Mean NLL (nats, summed over steps) per category, plus the harmonic mean."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    nll = -sequence_log_probs(model, ids, labels)
    return CategoryScores.from_values(nll, labels)
