"""Vocabulary, labelled datasets and batching.

Input corpora are pre-tokenized: UTF-8, one sentence per line, tokens separated
by spaces. Each category lives in its own file; the file index is the label.
"""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.utils.errors import CorpusError

logger = logging.getLogger(__name__)

PAD = "<pad>"
BOS = "<bos>"
RESERVED = (PAD, BOS)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple
    pad_id: int = 0
    bos_id: int = 1
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, tok in enumerate(self.tokens):
            if tok in index:
                raise CorpusError(f"Duplicate token {tok!r} in vocabulary")
            index[tok] = i
        object.__setattr__(self, "index", index)
        if self.pad_id == self.bos_id:
            raise CorpusError("pad_id and bos_id must differ")
        for name, i in (("pad_id", self.pad_id), ("bos_id", self.bos_id)):
            if not 0 <= i < len(self.tokens):
                raise CorpusError(f"{name}={i} outside vocabulary of size {len(self.tokens)}")

    @property
    def size(self):
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    @property
    def reserved_ids(self):
        return (self.pad_id, self.bos_id)

    def encode(self, tokens):
        ids = []
        for tok in tokens:
            try:
                ids.append(self.index[tok])
            except KeyError:
                raise CorpusError(f"Out-of-vocabulary token {tok!r}") from None
        return ids

    def decode(self, ids, strip_pad=False):
        out = []
        for i in ids:
            i = int(i)
            if strip_pad and i == self.pad_id:
                continue
            if not 0 <= i < self.size:
                raise CorpusError(f"Token id {i} outside vocabulary of size {self.size}")
            out.append(self.tokens[i])
        return out

    def digest(self):
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{t}\n" for t in self.tokens), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path, reserved=RESERVED):
        tokens = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_tokens(tokens, reserved)

    @classmethod
    def from_tokens(cls, tokens, reserved=RESERVED):
        tokens = tuple(tokens)
        index = {t: i for i, t in enumerate(tokens)}
        missing = [t for t in reserved if t not in index]
        if missing:
            raise CorpusError(f"Vocabulary lacks reserved tokens: {missing}")
        return cls(tokens, pad_id=index[reserved[0]], bos_id=index[reserved[1]])

    @classmethod
    def numbered(cls, n_tokens, reserved=RESERVED):
        """Reserved tokens followed by the content ids themselves ("2", "3", ...).

        Used for synthetic data, where a token's text is its own id.
        """
        return cls(tuple(reserved) + tuple(str(i) for i in range(len(reserved), len(reserved) + n_tokens)))


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple
    effective_length: int

    def __post_init__(self):
        if not 1 <= self.effective_length <= len(self.ids):
            raise CorpusError(
                f"effective_length {self.effective_length} outside 1..{len(self.ids)}"
            )

    @property
    def content(self):
        """Ids without the trailing padding."""
        return self.ids[: self.effective_length]


@dataclass(frozen=True)
class LabeledDataset:
    """Fixed-length padded sequences with category labels.

    ``ids`` is an (N, T) int64 array, ``lengths`` and ``labels`` are (N,).
    Arrays are made read-only on construction.
    """

    ids: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    k: int
    vocab_size: int
    pad_id: int = 0
    truncated: int = 0

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if ids.ndim != 2:
            raise CorpusError(f"ids must be a 2-D (N, T) array, got shape {ids.shape}")
        lengths = np.asarray(self.lengths, dtype=np.int64).reshape(-1)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if not (len(ids) == len(lengths) == len(labels)):
            raise CorpusError("ids, lengths and labels must have the same length")
        if self.k < 1:
            raise CorpusError(f"k must be >= 1, got {self.k}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise CorpusError(f"Token ids must lie in [0, {self.vocab_size})")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise CorpusError(f"Labels must lie in [0, {self.k})")
        for arr in (ids, lengths, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "labels", labels)

    @property
    def seq_len(self):
        return self.ids.shape[1]

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return TokenSequence(tuple(int(t) for t in self.ids[i]), int(self.lengths[i]))

    def category_indices(self, category):
        return np.flatnonzero(self.labels == category)

    def category_counts(self):
        return np.bincount(self.labels, minlength=self.k)

    def subset(self, category):
        idx = self.category_indices(category)
        return LabeledDataset(self.ids[idx], self.lengths[idx], self.labels[idx],
                              self.k, self.vocab_size, self.pad_id)

    def require_all_categories(self):
        empty = [c for c, n in enumerate(self.category_counts()) if n == 0]
        if empty:
            raise CorpusError(f"Categories without sequences: {empty}")
        return self

    def sample_category(self, category, n, rng):
        """Draw ``n`` sequences of one category (without replacement when possible)."""
        idx = self.category_indices(category)
        if idx.size == 0:
            raise CorpusError(f"No sequences for category {category}")
        pick = rng.choice(idx, size=n, replace=n > idx.size)
        return self.ids[pick]

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        first = parts[0]
        return cls(
            np.concatenate([p.ids for p in parts]),
            np.concatenate([p.lengths for p in parts]),
            np.concatenate([p.labels for p in parts]),
            max(p.k for p in parts),
            first.vocab_size,
            first.pad_id,
            sum(p.truncated for p in parts),
        )


def _read_sentences(path):
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"Corpus file not found: {path}")
    sentences = []
    blank = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if not tokens:
                blank += 1
                continue
            sentences.append(tokens)
    if blank:
        logger.warning("Skipped %d blank lines in %s", blank, path)
    return sentences


def build_vocab(corpus_files, reserved=RESERVED):
    """Reserved tokens first, then corpus tokens by descending frequency, ties lexicographic."""
    reserved = tuple(reserved)
    if len(reserved) < 2:
        raise CorpusError("Need at least the pad and bos reserved tokens")
    if len(set(reserved)) != len(reserved):
        raise CorpusError(f"Duplicate reserved token in {reserved}")

    counts = Counter()
    for path in corpus_files:
        for tokens in _read_sentences(path):
            counts.update(tokens)
    for tok in reserved:
        counts.pop(tok, None)
    if not counts:
        raise CorpusError("Corpus is empty: no tokens found in " + ", ".join(map(str, corpus_files)))

    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = Vocabulary(reserved + tuple(tok for tok, _ in ordered))
    logger.info("Built vocabulary of %d tokens (%d reserved)", vocab.size, len(reserved))
    return vocab


def encode_sentences(sentences, vocab, seq_len, label, k):
    n = len(sentences)
    ids = np.full((n, seq_len), vocab.pad_id, dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    truncated = 0
    for row, tokens in enumerate(sentences):
        encoded = vocab.encode(tokens)
        if len(encoded) > seq_len:
            truncated += 1
            encoded = encoded[:seq_len]
        ids[row, : len(encoded)] = encoded
        lengths[row] = len(encoded)
    labels = np.full(n, label, dtype=np.int64)
    return LabeledDataset(ids, lengths, labels, k, vocab.size, vocab.pad_id, truncated)


def load_labeled(paths_per_category, vocab, seq_len):
    """One file per category; the file's position in the list is its label."""
    if seq_len < 1:
        raise CorpusError(f"seq_len must be >= 1, got {seq_len}")
    k = len(paths_per_category)
    if k == 0:
        raise CorpusError("Need at least one category file")

    parts = []
    for label, path in enumerate(paths_per_category):
        sentences = _read_sentences(path)
        try:
            parts.append(encode_sentences(sentences, vocab, seq_len, label, k))
        except CorpusError as e:
            raise CorpusError(f"{path}: {e}") from e

    dataset = LabeledDataset.concat(parts).require_all_categories()
    if dataset.truncated:
        logger.warning("Truncated %d sentences longer than %d tokens", dataset.truncated, seq_len)
    logger.info("Loaded %d sequences over %d categories (T=%d)", len(dataset), k, seq_len)
    return dataset


def write_corpus(dataset, vocab, paths_per_category):
    """Write each category's sequences, one sentence per line (padding stripped)."""
    for label, path in enumerate(paths_per_category):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for row in dataset.category_indices(label):
                fh.write(" ".join(vocab.decode(dataset[row].content)) + "\n")


def batch_iter(dataset, batch_size, per_category=False, seed=0, repeat=False):
    """Yield (ids, labels) minibatches.

    With ``per_category`` every batch comes from a single category and
    categories take turns round-robin; a category that runs out drops out of
    the rotation. Shuffling is fully determined by ``seed``.
    """
    if batch_size < 1:
        raise CorpusError(f"batch_size must be >= 1, got {batch_size}")
    if per_category:
        counts = dataset.category_counts()
        small = [c for c, n in enumerate(counts) if n < batch_size]
        if small:
            raise CorpusError(
                f"batch_size {batch_size} exceeds the sequences available in categories {small}"
            )
    elif len(dataset) < 1:
        raise CorpusError("Cannot batch an empty dataset")

    rng = np.random.default_rng(seed)
    while True:
        if per_category:
            queues = []
            for c in range(dataset.k):
                idx = rng.permutation(dataset.category_indices(c))
                queues.append([idx[i : i + batch_size] for i in range(0, len(idx), batch_size)])
            turn = 0
            while any(queues):
                queue = queues[turn % dataset.k]
                turn += 1
                if not queue:
                    continue
                chunk = queue.pop(0)
                yield dataset.ids[chunk], dataset.labels[chunk]
        else:
            order = rng.permutation(len(dataset))
            for i in range(0, len(order), batch_size):
                chunk = order[i : i + batch_size]
                yield dataset.ids[chunk], dataset.labels[chunk]
        if not repeat:
            return
