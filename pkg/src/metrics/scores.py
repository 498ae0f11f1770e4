"""Quality and diversity metrics: NLL_oracle, NLL_gen, NLL_div, BLEU-n and
harmonic-mean aggregation over categories.

All NLL values are in nats, summed over time steps and averaged over sequences.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import torch
from nltk.translate.bleu_score import brevity_penalty
from nltk.util import ngrams

from src.utils.errors import MetricError

logger = logging.getLogger(__name__)


def harmonic_mean(values):
    """len / sum(1/v); a zero value gives 0 (the continuous limit)."""
    values = [float(v) for v in values]
    if not values:
        raise MetricError("harmonic_mean of an empty sequence")
    if any(v < 0 for v in values):
        raise MetricError(f"harmonic_mean needs non-negative values, got {values}")
    if any(v == 0 for v in values):
        return 0.0
    return len(values) / sum(1.0 / v for v in values)


@dataclass
class CategoryScores:
    per_category: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    @property
    def harmonic(self):
        return harmonic_mean(self.per_category.values())

    @classmethod
    def from_values(cls, values, labels):
        values = np.asarray(values, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if values.size == 0:
            raise MetricError("No sequences to score")
        scores = cls()
        for c in np.unique(labels):
            mask = labels == c
            scores.per_category[int(c)] = float(values[mask].mean())
            scores.counts[int(c)] = int(mask.sum())
        return scores


# ---- likelihood metrics -------------------------------------------------------


def _sample_ids(gen, category, n_samples, seq_len, seed):
    g = torch.Generator()
    g.manual_seed(seed)
    with torch.no_grad():
        return gen.generate(category, n_samples, seq_len, tau=1.0, generator=g).hard_ids


def nll_div(gen, category, n_samples, seq_len, seed):
    """NLL of the generator's own Gumbel-Max samples, scored without noise."""
    if n_samples < 1:
        raise MetricError(f"n_samples must be >= 1, got {n_samples}")
    ids = _sample_ids(gen, category, n_samples, seq_len, seed)
    with torch.no_grad():
        lp = gen.sequence_log_prob(ids, category)
    return float(-lp.double().mean())


def nll_gen(gen, dataset):
    """Teacher-forced NLL of real sequences under the generator, per category."""
    if len(dataset) == 0:
        raise MetricError("nll_gen needs a non-empty test set")
    labels = dataset.labels
    if labels.max() >= gen.k:
        raise MetricError(f"Label {int(labels.max())} outside the generator's {gen.k} categories")
    # dataset arrays are read-only; torch needs its own copy
    ids = torch.as_tensor(np.array(dataset.ids), dtype=torch.long)
    cats = torch.as_tensor(np.array(labels), dtype=torch.long)
    values = np.empty(len(dataset), dtype=np.float64)
    with torch.no_grad():
        for lo in range(0, len(dataset), 4096):
            sl = slice(lo, lo + 4096)
            values[sl] = -gen.sequence_log_prob(ids[sl], cats[sl]).double().numpy()
    return CategoryScores.from_values(values, labels)


def nll_oracle_metric(oracle, gen, category, n_samples, seq_len, seed):
    """Oracle NLL of ``n_samples`` hard generator samples for one category."""
    from src.models.oracle import oracle_nll

    ids = _sample_ids(gen, category, n_samples, seq_len, seed)
    scores = oracle_nll(oracle, ids.numpy(), np.full(n_samples, category))
    return scores.per_category[int(category)]


# ---- BLEU ---------------------------------------------------------------------


class ReferenceSet:
    """Reference corpus with n-gram counts clipped to the max over references.

    Every candidate is scored against the whole set, so the per-reference
    maxima are computed once instead of once per candidate.
    """

    def __init__(self, references, max_order=5):
        self.references = [list(r) for r in references]
        if not self.references:
            raise MetricError("BLEU needs at least one reference")
        self.max_order = max_order
        self.max_counts = []
        for n in range(1, max_order + 1):
            best = Counter()
            for ref in self.references:
                for gram, cnt in Counter(ngrams(ref, n)).items():
                    if cnt > best[gram]:
                        best[gram] = cnt
            self.max_counts.append(best)
        self.lengths = sorted({len(r) for r in self.references})

    def closest_length(self, hyp_len):
        return min(self.lengths, key=lambda ref_len: (abs(ref_len - hyp_len), ref_len))

    def clipped_precision(self, candidate, n):
        counts = Counter(ngrams(candidate, n))
        total = sum(counts.values())
        best = self.max_counts[n - 1]
        matched = sum(min(cnt, best[gram]) for gram, cnt in counts.items())
        return matched, total

    def sentence_bleu(self, candidate, n):
        """Unsmoothed BLEU-n of one candidate; any zero-precision order gives 0."""
        candidate = list(candidate)
        if not candidate:
            return 0.0
        log_sum = 0.0
        for order in range(1, n + 1):
            matched, total = self.clipped_precision(candidate, order)
            if matched == 0 or total == 0:
                return 0.0
            log_sum += math.log(matched / total)
        bp = brevity_penalty(self.closest_length(len(candidate)), len(candidate))
        return bp * math.exp(log_sum / n)


def bleu_n(candidates, references, n, reference_set=None):
    """Mean sentence-level BLEU-n of the candidates against the full reference set."""
    if not 2 <= n <= 5:
        raise MetricError(f"BLEU order must lie in 2..5, got {n}")
    if not candidates:
        raise MetricError("BLEU needs at least one candidate")
    refs = reference_set or ReferenceSet(references, max_order=n)
    if refs.max_order < n:
        raise MetricError(f"Reference set built for order {refs.max_order}, need {n}")
    return float(np.mean([refs.sentence_bleu(c, n) for c in candidates]))
