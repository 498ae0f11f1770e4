"""Category-conditioned relational-memory generator with Gumbel-Softmax outputs."""

import logging
import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.utils.errors import ModelError

logger = logging.getLogger(__name__)


@dataclass
class SoftBatch:
    """``n`` generated sequences of one category: relaxed rows plus the hard tokens."""

    rows: torch.Tensor  # (n, T, V)
    hard_ids: torch.Tensor  # (n, T)
    category: int
    tau: float

    def __len__(self):
        return self.hard_ids.shape[0]


def gumbel_noise(shape, generator=None, dtype=None):
    """g = -log(-log U), U ~ Uniform(0, 1)."""
    dtype = dtype or torch.get_default_dtype()
    u = torch.rand(shape, generator=generator, dtype=dtype)
    tiny = torch.finfo(dtype).tiny
    return -torch.log(-torch.log(u.clamp_min(tiny)))


def gumbel_sample(logits, tau, generator=None, noise=None):
    """Gumbel-Max token plus its relaxation softmax(tau * (o + g)).

    ``tau`` multiplies the perturbed logits, so larger values give sharper rows.
    Ties in the argmax go to the lowest index.
    """
    if not tau > 0:
        raise ModelError(f"Temperature must be > 0, got {tau}")
    if noise is None:
        noise = gumbel_noise(logits.shape, generator, logits.dtype)
    perturbed = logits + noise
    ids = perturbed.argmax(dim=-1)
    soft = F.softmax(tau * perturbed, dim=-1)
    return ids, soft


class RelationalMemoryGenerator(nn.Module):
    """Relational memory core conditioned on a category embedding.

    Each step attends from the memory slots over [memory; x_t] with ``num_heads``
    heads, then combines the proposed update with the old memory through a
    residual MLP and a sigmoid input/forget gate pair. The output logits are a
    linear read-out of the post-MLP memory.
    """

    def __init__(
        self,
        vocab_size,
        k,
        emb_dim=32,
        cat_dim=16,
        mem_slots=1,
        mem_dim=64,
        num_heads=2,
        bos_id=1,
        blocked_ids=(),
        soft_feedback=False,
    ):
        super().__init__()
        if mem_dim % num_heads:
            raise ModelError(f"mem_dim {mem_dim} not divisible by num_heads {num_heads}")
        if not 0 <= bos_id < vocab_size:
            raise ModelError(f"bos_id {bos_id} outside vocabulary of size {vocab_size}")
        if len(set(blocked_ids)) >= vocab_size:
            raise ModelError("Every token is blocked")
        self.vocab_size = vocab_size
        self.k = k
        self.emb_dim = emb_dim
        self.cat_dim = cat_dim
        self.mem_slots = mem_slots
        self.mem_dim = mem_dim
        self.num_heads = num_heads
        self.head_size = mem_dim // num_heads
        self.bos_id = bos_id
        self.blocked_ids = tuple(int(i) for i in blocked_ids)
        self.soft_feedback = soft_feedback

        self.token_embedding = nn.Parameter(torch.empty(vocab_size, emb_dim))
        self.category_embedding = nn.Parameter(torch.empty(k, cat_dim))
        self.input_proj = nn.Linear(emb_dim + cat_dim, mem_dim, bias=False)
        self.query = nn.Linear(mem_dim, mem_dim, bias=False)
        self.key = nn.Linear(mem_dim, mem_dim, bias=False)
        self.value = nn.Linear(mem_dim, mem_dim, bias=False)
        self.mlp = nn.Sequential(
            nn.Linear(mem_dim, mem_dim), nn.ReLU(), nn.Linear(mem_dim, mem_dim)
        )
        self.input_gate = nn.Linear(2 * mem_dim, mem_dim)
        self.forget_gate = nn.Linear(2 * mem_dim, mem_dim)
        self.output = nn.Linear(mem_slots * mem_dim, vocab_size)
        self.initial_memory = nn.Parameter(torch.empty(mem_slots, mem_dim))

        mask = torch.zeros(vocab_size, dtype=torch.bool)
        mask[list(self.blocked_ids)] = True
        self.register_buffer("blocked", mask, persistent=False)
        self.reset_parameters()

    def reset_parameters(self):
        with torch.no_grad():
            nn.init.normal_(self.token_embedding, std=1.0 / math.sqrt(self.emb_dim))
            nn.init.normal_(self.category_embedding, std=1.0 / math.sqrt(self.cat_dim))
            nn.init.zeros_(self.forget_gate.bias)
            self.forget_gate.bias.add_(1.0)
            self.initial_memory.copy_(torch.eye(self.mem_slots, self.mem_dim))

    def metadata(self):
        return {
            "kind": "generator",
            "vocab_size": self.vocab_size,
            "k": self.k,
            "emb_dim": self.emb_dim,
            "cat_dim": self.cat_dim,
            "mem_slots": self.mem_slots,
            "mem_dim": self.mem_dim,
            "num_heads": self.num_heads,
            "bos_id": self.bos_id,
            "blocked_ids": list(self.blocked_ids),
            "soft_feedback": self.soft_feedback,
        }

    @property
    def dtype(self):
        return self.initial_memory.dtype

    def _categories(self, category, n):
        if torch.is_tensor(category) and category.dim() > 0:
            cats = category.long()
        else:
            cats = torch.full((n,), int(category), dtype=torch.long)
        if cats.numel() and (cats.min() < 0 or cats.max() >= self.k):
            raise ModelError(f"Category outside [0, {self.k}): {cats.tolist()[:5]}")
        return cats

    def initial_state(self, n):
        return self.initial_memory.unsqueeze(0).expand(n, -1, -1)

    def embed_input(self, y, category):
        """x_t = [E_y; E_c] W_x for token ids (n,) or probability rows (n, V)."""
        if y.is_floating_point():
            if y.shape[-1] != self.vocab_size:
                raise ModelError(f"Probability rows have width {y.shape[-1]}, expected {self.vocab_size}")
            token = y @ self.token_embedding
        else:
            if y.numel() and (y.min() < 0 or y.max() >= self.vocab_size):
                raise ModelError(f"Token id outside [0, {self.vocab_size})")
            token = self.token_embedding[y]
        cats = self._categories(category, y.shape[0])
        return self.input_proj(torch.cat([token, self.category_embedding[cats]], dim=-1))

    def attend(self, memory, x):
        """Multi-head attention from memory slots over [memory; x].

        Returns the proposed update (n, m, d) and attention weights (n, H, m, m + 1).
        """
        n, m, d = memory.shape
        h, hs = self.num_heads, self.head_size
        mem_x = torch.cat([memory, x.unsqueeze(1)], dim=1)
        q = self.query(memory).view(n, m, h, hs).transpose(1, 2)
        k = self.key(mem_x).view(n, m + 1, h, hs).transpose(1, 2)
        v = self.value(mem_x).view(n, m + 1, h, hs).transpose(1, 2)
        weights = F.softmax(q @ k.transpose(-1, -2) / math.sqrt(hs), dim=-1)
        proposal = (weights @ v).transpose(1, 2).reshape(n, m, d)
        return proposal, weights

    def rmc_step(self, memory, x, step=None):
        proposal, _ = self.attend(memory, x)
        hidden = memory + proposal
        hidden = hidden + self.mlp(hidden)
        gate_in = torch.cat([proposal, torch.tanh(memory)], dim=-1)
        i = torch.sigmoid(self.input_gate(gate_in))
        f = torch.sigmoid(self.forget_gate(gate_in))
        next_memory = i * torch.tanh(hidden) + f * memory
        logits = self.output(hidden.flatten(1))

        if not (torch.isfinite(next_memory).all() and torch.isfinite(logits).all()):
            where = "" if step is None else f" at step {step}"
            raise ModelError(f"Non-finite generator state{where}")
        return next_memory, logits.masked_fill(self.blocked, float("-inf"))

    def generate(self, category, n, seq_len, tau, generator=None, noise=None):
        """Ancestral rollout from bos; both hard tokens and relaxed rows are kept.

        ``noise`` optionally fixes the Gumbel draws, shape (n, seq_len, V).
        """
        cats = self._categories(category, n)
        memory = self.initial_state(n)
        inp = torch.full((n,), self.bos_id, dtype=torch.long)
        rows, hard = [], []
        for t in range(seq_len):
            x = self.embed_input(inp, cats)
            memory, logits = self.rmc_step(memory, x, step=t)
            ids, soft = gumbel_sample(
                logits, tau, generator, None if noise is None else noise[:, t]
            )
            rows.append(soft)
            hard.append(ids)
            inp = soft if self.soft_feedback else ids
        if seq_len == 0:
            empty = torch.zeros(n, 0, self.vocab_size, dtype=self.dtype)
            return SoftBatch(empty, torch.zeros(n, 0, dtype=torch.long), int(category), float(tau))
        return SoftBatch(torch.stack(rows, 1), torch.stack(hard, 1), int(category), float(tau))

    @torch.no_grad()
    def sample(self, category, n, seq_len, tau=1.0, generator=None):
        """Hard tokens only, drawn as argmax(tau * o + g).

        ``tau`` = 1 samples the model distribution itself; larger values sharpen it.
        Gumbel-Max tokens from ``generate`` do not depend on tau, so this is the
        knob for inspecting sharper or flatter outputs.
        """
        if not tau > 0:
            raise ModelError(f"Temperature must be > 0, got {tau}")
        cats = self._categories(category, n)
        memory = self.initial_state(n)
        inp = torch.full((n,), self.bos_id, dtype=torch.long)
        out = torch.zeros(n, seq_len, dtype=torch.long)
        for t in range(seq_len):
            memory, logits = self.rmc_step(memory, self.embed_input(inp, cats), step=t)
            inp = (tau * logits + gumbel_noise(logits.shape, generator, logits.dtype)).argmax(dim=-1)
            out[:, t] = inp
        return out

    def step_log_probs(self, ids, category):
        """Teacher-forced per-step log-probabilities of ``ids`` (n, T) -> (n, T)."""
        ids = torch.as_tensor(ids, dtype=torch.long)
        n, seq_len = ids.shape
        cats = self._categories(category, n)
        memory = self.initial_state(n)
        inp = torch.full((n,), self.bos_id, dtype=torch.long)
        out = []
        for t in range(seq_len):
            memory, logits = self.rmc_step(memory, self.embed_input(inp, cats), step=t)
            out.append(F.log_softmax(logits, dim=-1).gather(1, ids[:, t : t + 1]).squeeze(1))
            inp = ids[:, t]
        return torch.stack(out, 1) if out else torch.zeros(n, 0, dtype=self.dtype)

    def sequence_log_prob(self, ids, category):
        """log P(y_1..y_T | c) under teacher forcing, no noise, no temperature."""
        return self.step_log_probs(ids, category).sum(dim=1)


def build_generator(cfg, vocab, blocked_ids):
    return RelationalMemoryGenerator(
        vocab_size=vocab.size,
        k=cfg.k,
        emb_dim=cfg.emb_dim,
        cat_dim=cfg.cat_dim,
        mem_slots=cfg.mem_slots,
        mem_dim=cfg.mem_dim,
        num_heads=cfg.num_heads,
        bos_id=vocab.bos_id,
        blocked_ids=blocked_ids,
        soft_feedback=cfg.soft_feedback,
    )
