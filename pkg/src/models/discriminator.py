"""CNN sequence scorer: one unbounded logit per (hard or relaxed) sequence."""

import logging

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.utils.errors import ModelError

logger = logging.getLogger(__name__)


class CNNDiscriminator(nn.Module):
    """Embedding by probability-row product, multi-width 1-D convolutions over
    time, max-over-time pooling and a one-hidden-layer head.

    The network is category-agnostic and has no final sigmoid; the relativistic
    losses work on raw logits.
    """

    def __init__(self, vocab_size, seq_len, emb_dim=32, filter_widths=(2, 3, 4), num_filters=16,
                 hidden=64, dropout=0.0):
        super().__init__()
        bad = [w for w in filter_widths if not 1 <= w <= seq_len]
        if bad:
            raise ModelError(f"Filter widths {bad} do not fit sequences of length {seq_len}")
        self.vocab_size = vocab_size
        self.seq_len = seq_len
        self.emb_dim = emb_dim
        self.filter_widths = tuple(int(w) for w in filter_widths)
        self.num_filters = num_filters
        self.hidden_size = hidden
        self.dropout_p = dropout

        self.embedding = nn.Parameter(torch.empty(vocab_size, emb_dim))
        nn.init.normal_(self.embedding, std=1.0 / emb_dim**0.5)
        self.convs = nn.ModuleList(
            nn.Conv1d(emb_dim, num_filters, kernel_size=w) for w in self.filter_widths
        )
        self.hidden = nn.Linear(num_filters * len(self.filter_widths), hidden)
        self.dropout = nn.Dropout(dropout)
        self.out = nn.Linear(hidden, 1)

    def metadata(self):
        return {
            "kind": "discriminator",
            "vocab_size": self.vocab_size,
            "seq_len": self.seq_len,
            "emb_dim": self.emb_dim,
            "filter_widths": list(self.filter_widths),
            "num_filters": self.num_filters,
            "hidden": self.hidden_size,
            "dropout": self.dropout_p,
        }

    def as_rows(self, inputs):
        """Hard (n, T) ids become one-hot rows; relaxed (n, T, V) rows pass through."""
        if not torch.is_tensor(inputs):
            inputs = getattr(inputs, "rows", None)
            if inputs is None:
                raise ModelError("Discriminator input must be a tensor or a SoftBatch")
        if inputs.is_floating_point():
            if inputs.dim() != 3 or inputs.shape[-1] != self.vocab_size:
                raise ModelError(
                    f"Relaxed input must be (n, T, {self.vocab_size}), got {tuple(inputs.shape)}"
                )
            return inputs
        if inputs.dim() != 2:
            raise ModelError(f"Hard input must be (n, T) ids, got {tuple(inputs.shape)}")
        if inputs.numel() and (inputs.min() < 0 or inputs.max() >= self.vocab_size):
            raise ModelError(f"Token id outside [0, {self.vocab_size})")
        return F.one_hot(inputs.long(), self.vocab_size).to(self.embedding.dtype)

    def forward(self, inputs):
        rows = self.as_rows(inputs)
        if rows.shape[1] < max(self.filter_widths):
            raise ModelError(
                f"Sequences of length {rows.shape[1]} are shorter than filter width {max(self.filter_widths)}"
            )
        emb = (rows @ self.embedding).transpose(1, 2)  # (n, d, T)
        pooled = [F.relu(conv(emb)).amax(dim=2) for conv in self.convs]
        features = torch.cat(pooled, dim=1)
        features = self.dropout(F.relu(self.hidden(features)))
        return self.out(features).squeeze(1)


def build_discriminator(cfg, vocab):
    return CNNDiscriminator(
        vocab_size=vocab.size,
        seq_len=cfg.seq_len,
        emb_dim=cfg.disc_emb_dim,
        filter_widths=cfg.disc_filter_widths,
        num_filters=cfg.disc_num_filters,
        hidden=cfg.disc_hidden,
        dropout=cfg.disc_dropout,
    )
