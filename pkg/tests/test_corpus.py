import numpy as np
import pytest

from src.data.corpus import (
    BOS,
    PAD,
    LabeledDataset,
    Vocabulary,
    batch_iter,
    build_vocab,
    load_labeled,
    write_corpus,
)
from src.utils.errors import CorpusError


def write_lines(path, lines):
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


@pytest.fixture
def corpus(tmp_path):
    neg = write_lines(tmp_path / "neg.txt", ["the film was dull", "", "dull dull plot"])
    pos = write_lines(tmp_path / "pos.txt", ["the film was great", "great cast"])
    return [neg, pos]


class TestBuildVocab:
    def test_reserved_first_then_frequency_then_lexicographic(self, corpus):
        vocab = build_vocab(corpus)
        assert vocab.tokens[:2] == (PAD, BOS)
        # dull: 3, film/great/the/was: 2, cast/plot: 1
        assert vocab.tokens[2:] == ("dull", "film", "great", "the", "was", "cast", "plot")
        assert vocab.pad_id == 0 and vocab.bos_id == 1

    def test_empty_corpus(self, tmp_path):
        empty = write_lines(tmp_path / "empty.txt", ["", "   "])
        with pytest.raises(CorpusError, match="empty"):
            build_vocab([empty])

    def test_duplicate_reserved(self, corpus):
        with pytest.raises(CorpusError, match="Duplicate"):
            build_vocab(corpus, reserved=(PAD, PAD))

    def test_save_and_load(self, corpus, tmp_path):
        vocab = build_vocab(corpus)
        loaded = Vocabulary.load(vocab.save(tmp_path / "vocab.txt"))
        assert loaded == vocab
        assert loaded.digest() == vocab.digest()


class TestVocabulary:
    def test_oov_token_is_named(self, vocab):
        with pytest.raises(CorpusError, match="'zebra'"):
            vocab.encode(["2", "zebra"])

    def test_numbered(self):
        vocab = Vocabulary.numbered(3)
        assert vocab.tokens == (PAD, BOS, "2", "3", "4")
        assert vocab.encode(["3", "4"]) == [3, 4]

    def test_decode_strips_padding(self, vocab):
        assert vocab.decode([2, 3, 0, 0], strip_pad=True) == ["2", "3"]
        assert vocab.decode([2, 0]) == ["2", PAD]

    def test_duplicate_token(self):
        with pytest.raises(CorpusError, match="Duplicate token"):
            Vocabulary((PAD, BOS, "a", "a"))


class TestLoadLabeled:
    def test_labels_follow_file_order(self, corpus):
        vocab = build_vocab(corpus)
        data = load_labeled(corpus, vocab, seq_len=5)
        assert len(data) == 4
        np.testing.assert_array_equal(data.labels, [0, 0, 1, 1])
        np.testing.assert_array_equal(data.category_counts(), [2, 2])
        assert data[0].effective_length == 4
        assert data.ids[3, 2] == vocab.pad_id

    def test_truncation_is_counted(self, corpus, caplog):
        vocab = build_vocab(corpus)
        data = load_labeled(corpus, vocab, seq_len=3)
        assert data.truncated == 2
        assert data.lengths.max() == 3
        assert "Truncated 2" in caplog.text

    def test_oov_names_file(self, corpus, tmp_path):
        vocab = build_vocab(corpus[:1])
        with pytest.raises(CorpusError, match="pos.txt"):
            load_labeled(corpus, vocab, seq_len=5)

    def test_empty_category(self, corpus, tmp_path):
        empty = write_lines(tmp_path / "empty.txt", [""])
        vocab = build_vocab(corpus)
        with pytest.raises(CorpusError, match="without sequences"):
            load_labeled([corpus[0], empty], vocab, seq_len=5)

    def test_write_corpus_round_trip(self, corpus, tmp_path):
        vocab = build_vocab(corpus)
        data = load_labeled(corpus, vocab, seq_len=6)
        out = [tmp_path / "a.txt", tmp_path / "b.txt"]
        write_corpus(data, vocab, out)
        assert out[0].read_text().splitlines() == ["the film was dull", "dull dull plot"]
        again = load_labeled(out, vocab, seq_len=6)
        np.testing.assert_array_equal(again.ids, data.ids)


class TestLabeledDataset:
    def test_arrays_are_read_only(self, dataset):
        with pytest.raises(ValueError):
            dataset.ids[0, 0] = 3

    def test_rejects_bad_labels(self):
        with pytest.raises(CorpusError, match="Labels"):
            LabeledDataset(np.zeros((2, 3)), [3, 3], [0, 2], k=2, vocab_size=4)

    def test_rejects_one_dimensional_ids(self):
        with pytest.raises(CorpusError, match="2-D"):
            LabeledDataset(np.zeros(3), [1, 1, 1], [0, 0, 0], k=1, vocab_size=4)

    def test_sample_category_stays_in_category(self, dataset):
        rng = np.random.default_rng(0)
        rows = dataset.sample_category(1, 50, rng)
        members = {tuple(r) for r in dataset.ids[dataset.category_indices(1)]}
        assert rows.shape == (50, dataset.seq_len)
        assert all(tuple(r) in members for r in rows)


class TestBatchIter:
    def test_one_epoch_covers_everything_once(self, dataset):
        seen = np.concatenate([labels for _, labels in batch_iter(dataset, 7, seed=3)])
        assert len(seen) == len(dataset)
        np.testing.assert_array_equal(np.bincount(seen), dataset.category_counts())

    def test_per_category_batches_are_pure_and_alternate(self, dataset):
        batches = list(batch_iter(dataset, 5, per_category=True, seed=0))
        cats = [int(labels[0]) for _, labels in batches]
        assert all((labels == labels[0]).all() for _, labels in batches)
        assert cats[:4] == [0, 1, 0, 1]
        assert sum(len(labels) for _, labels in batches) == len(dataset)

    def test_same_seed_same_order(self, dataset):
        a = [ids for ids, _ in batch_iter(dataset, 4, seed=11)]
        b = [ids for ids, _ in batch_iter(dataset, 4, seed=11)]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_batch_larger_than_a_category(self, dataset):
        with pytest.raises(CorpusError, match="exceeds"):
            next(batch_iter(dataset, 21, per_category=True))

    def test_zero_batch_size(self, dataset):
        with pytest.raises(CorpusError):
            next(batch_iter(dataset, 0))

    def test_repeat_keeps_going(self, dataset):
        it = batch_iter(dataset, 40, seed=0, repeat=True)
        assert len([next(it) for _ in range(5)]) == 5
