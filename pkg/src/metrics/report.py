"""Metric suite assembly: per-category values, harmonic means, and their emission
as JSON lines (machine) and an aligned table (human).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src.metrics.scores import ReferenceSet, bleu_n, harmonic_mean, nll_div, nll_gen, nll_oracle_metric
from src.utils.errors import MetricError
from src.utils.rng import METRICS, derive_seed, torch_generator

logger = logging.getLogger(__name__)

# column order of the human-readable table
METRIC_ORDER = ("nll_oracle", "nll_gen", "nll_div", "bleu_2", "bleu_3", "bleu_4", "bleu_5")


@dataclass
class MetricsReport:
    per_category: dict = field(default_factory=dict)  # category -> {metric: value}
    harmonic: dict = field(default_factory=dict)  # metric -> harmonic mean over categories
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_per_category(cls, per_category, meta=None):
        names = sorted({m for values in per_category.values() for m in values})
        harmonic = {}
        for name in names:
            values = [per_category[c][name] for c in sorted(per_category) if name in per_category[c]]
            harmonic[name] = harmonic_mean(values)
        return cls(dict(per_category), harmonic, dict(meta or {}))

    @property
    def metrics(self):
        return [m for m in METRIC_ORDER if m in self.harmonic] + sorted(
            m for m in self.harmonic if m not in METRIC_ORDER
        )

    def check_consistency(self, rel=1e-12):
        for name, value in self.harmonic.items():
            values = [v[name] for v in self.per_category.values() if name in v]
            expected = harmonic_mean(values)
            if not np.isclose(value, expected, rtol=rel, atol=0.0):
                raise MetricError(f"Harmonic {name} {value} does not match per-category values ({expected})")
        return True

    def to_record(self):
        return {
            "per_category": {str(c): dict(v) for c, v in sorted(self.per_category.items())},
            "harmonic": dict(self.harmonic),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_record(cls, record):
        per_category = {int(c): dict(v) for c, v in record.get("per_category", {}).items()}
        return cls(per_category, dict(record.get("harmonic", {})), dict(record.get("meta", {})))

    def log_fields(self):
        """Flat fields for a metrics-log record: harmonic values plus the per-category map."""
        fields = dict(self.harmonic)
        fields["per_category"] = {str(c): dict(v) for c, v in sorted(self.per_category.items())}
        return fields

    def table(self):
        rows = {f"category {c}": self.per_category[c] for c in sorted(self.per_category)}
        rows["harmonic"] = self.harmonic
        return pd.DataFrame.from_dict(rows, orient="index").reindex(columns=self.metrics)

    def to_text(self):
        return self.table().to_string(float_format=lambda v: f"{v:.4f}", na_rep="-")


@dataclass
class MetricsSuite:
    """Everything needed to score a generator repeatedly during and after training.

    ``oracle`` enables NLL_oracle (synthetic mode); ``test_set`` enables NLL_gen;
    ``vocab`` plus ``test_set`` enable BLEU (real mode only).
    """

    k: int
    seq_len: int
    n_samples: int
    seed: int
    oracle: object = None
    test_set: object = None
    vocab: object = None
    bleu_orders: tuple = ()
    _references: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.n_samples < 1:
            raise MetricError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.bleu_orders and (self.vocab is None or self.test_set is None):
            raise MetricError("BLEU needs a vocabulary and a test set")

    def category_seed(self, category):
        # fixed across steps so successive evaluations share their Gumbel draws
        return derive_seed(self.seed, METRICS, category)

    def reference_set(self):
        """Every test sentence, whatever its category."""
        if self._references is None:
            refs = [self.vocab.decode(self.test_set[i].content) for i in range(len(self.test_set))]
            if not refs:
                raise MetricError("No test sentences to use as BLEU references")
            self._references = ReferenceSet(refs, max_order=max(self.bleu_orders))
        return self._references

    def candidates(self, gen, category):
        ids = gen.sample(category, self.n_samples, self.seq_len, tau=1.0,
                         generator=torch_generator(self.seed, METRICS, category))
        return [self.vocab.decode(row, strip_pad=True) for row in ids.tolist()]

    def evaluate(self, gen, **meta):
        per_category = {c: {} for c in range(self.k)}
        for c in range(self.k):
            seed = self.category_seed(c)
            per_category[c]["nll_div"] = nll_div(gen, c, self.n_samples, self.seq_len, seed)
            if self.oracle is not None:
                per_category[c]["nll_oracle"] = nll_oracle_metric(
                    self.oracle, gen, c, self.n_samples, self.seq_len, seed
                )
            if self.bleu_orders:
                candidates = self.candidates(gen, c)
                refs = self.reference_set()
                for n in self.bleu_orders:
                    per_category[c][f"bleu_{n}"] = bleu_n(candidates, None, n, reference_set=refs)
        if self.test_set is not None:
            scores = nll_gen(gen, self.test_set)
            for c, value in scores.per_category.items():
                per_category[c]["nll_gen"] = value
        meta = dict(meta, n_samples=self.n_samples, seed=self.seed)
        return MetricsReport.from_per_category(per_category, meta)


class MetricsLog:
    """Append-only JSON-lines log shared by the pretraining and adversarial phases."""

    def __init__(self, path):
        self.path = Path(path)

    def append(self, record):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def truncate(self, phase, after_round):
        """Drop ``phase`` records whose round is greater than ``after_round``.

        Lines that do not parse are kept as they are; the reader skips them.
        """
        if not self.path.is_file():
            return 0
        kept, dropped = [], 0
        for line in self.path.read_text(encoding="utf-8").splitlines():
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                record = None
            if not isinstance(record, dict):
                kept.append(line)
                continue
            key = "round" if phase == "adversarial" else "epoch"
            if record.get("phase") == phase and record.get(key, -1) > after_round:
                dropped += 1
                continue
            kept.append(line)
        self.path.write_text("".join(f"{line}\n" for line in kept), encoding="utf-8")
        if dropped:
            logger.info("Dropped %d %s records after round %d from %s", dropped, phase, after_round, self.path)
        return dropped


def write_report(report, out_dir):
    """report.jsonl (one record) and report.txt (aligned table) under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl = out_dir / "report.jsonl"
    jsonl.write_text(json.dumps(report.to_record(), sort_keys=True) + "\n", encoding="utf-8")
    text = out_dir / "report.txt"
    text.write_text(report.to_text() + "\n", encoding="utf-8")
    return jsonl, text
