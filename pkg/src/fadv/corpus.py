"""Labeled text corpora, vocabulary, embedding tables and synonym lexicons.

All file formats are UTF-8 and line oriented:

* corpus:      ``text<TAB>label``
* synonyms:    ``word<TAB>syn1,syn2,...``
* embeddings:  ``word v1 v2 ... vdim``
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fadv.rng import stream

PAD = "<pad>"
UNK = "<unk>"


class CorpusFormatError(ValueError):
    """A data file does not follow its line format."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class EmptyCorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def detokenize(tokens) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class LabeledExample:
    text: tuple[str, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "text", tuple(self.text))
        if not self.text:
            raise ValueError("example text is empty")
        if self.label < 0:
            raise ValueError(f"negative label {self.label}")


@dataclass
class Corpus:
    train: list[LabeledExample]
    dev: list[LabeledExample] = field(default_factory=list)
    test: list[LabeledExample] = field(default_factory=list)
    num_classes: int = 2
    max_len: int = 40

    def split(self, name: str) -> list[LabeledExample]:
        if name not in ("train", "dev", "test"):
            raise KeyError(name)
        return getattr(self, name)


def read_examples(path, max_len: int) -> list[LabeledExample]:
    """Parse one ``text<TAB>label`` file, truncating sentences to ``max_len`` tokens."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if "\t" not in line:
                raise CorpusFormatError(path, lineno, "expected text<TAB>label")
            text, label = line.rsplit("\t", 1)
            try:
                y = int(label)
            except ValueError:
                raise CorpusFormatError(path, lineno, f"label {label!r} is not an integer") from None
            if y < 0:
                raise CorpusFormatError(path, lineno, f"negative label {y}")
            tokens = tokenize(text)[:max_len]
            if not tokens:
                raise CorpusFormatError(path, lineno, "empty text")
            examples.append(LabeledExample(tuple(tokens), y))
    return examples


def load_corpus(path, max_len: int = 40) -> Corpus:
    """Load a corpus from a single file (all train) or a directory holding
    ``train.tsv`` and optionally ``dev.tsv`` / ``test.tsv``."""
    path = Path(path)
    if path.is_dir():
        splits = {}
        for name in ("train", "dev", "test"):
            f = path / f"{name}.tsv"
            splits[name] = read_examples(f, max_len) if f.exists() else []
        if not (path / "train.tsv").exists():
            raise FileNotFoundError(path / "train.tsv")
    else:
        splits = {"train": read_examples(path, max_len), "dev": [], "test": []}
    if not any(splits.values()):
        raise EmptyCorpusError(f"{path}: no examples")
    labels = [ex.label for part in splits.values() for ex in part]
    num_classes = max(2, max(labels) + 1)
    return Corpus(num_classes=num_classes, max_len=max_len, **splits)


def write_examples(path, examples) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(f"{detokenize(ex.text)}\t{ex.label}\n")


@dataclass
class Vocab:
    words: list[str]
    index: dict[str, int]
    unk_id: int
    pad_id: int

    @classmethod
    def from_words(cls, words) -> "Vocab":
        words = list(words)
        index = {w: i for i, w in enumerate(words)}
        if len(index) != len(words):
            raise ValueError("duplicate words in vocabulary")
        return cls(words, index, index[UNK], index[PAD])

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def encode(self, tokens) -> np.ndarray:
        get, unk = self.index.get, self.unk_id
        return np.array([get(t, unk) for t in tokens], dtype=np.int64)

    def decode(self, ids) -> list[str]:
        return [self.words[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(w + "\n" for w in self.words)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            return cls.from_words(line.rstrip("\n") for line in fh)


def build_vocab(corpus: Corpus, min_freq: int = 1) -> Vocab:
    """PAD, UNK, then train words with count >= min_freq by (count desc, word)."""
    if not corpus.train:
        raise EmptyCorpusError("train split is empty")
    counts = Counter(t for ex in corpus.train for t in ex.text)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    kept = sorted((w for w, c in counts.items() if c >= min_freq), key=lambda w: (-counts[w], w))
    return Vocab.from_words([PAD, UNK] + kept)


@dataclass
class SynonymLexicon:
    entries: dict[str, list[str]]
    cap: int = 50

    def __post_init__(self):
        for word, cands in self.entries.items():
            if len(cands) > self.cap:
                raise ValueError(f"{word}: {len(cands)} candidates exceed cap {self.cap}")
            if word in cands:
                raise ValueError(f"{word} lists itself as a synonym")

    def __getitem__(self, word) -> list[str]:
        return self.entries.get(word, [])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for word in sorted(self.entries):
                fh.write(f"{word}\t{','.join(self.entries[word])}\n")


def load_synonyms(path, cap: int = 50) -> SynonymLexicon:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip():
                raise CorpusFormatError(path, lineno, "expected word<TAB>syn1,syn2,...")
            word = parts[0].strip().lower()
            cands = []
            for s in parts[1].split(","):
                s = s.strip().lower()
                if s and s != word and s not in cands:
                    cands.append(s)
            entries[word] = cands[:cap]
    return SynonymLexicon(entries, cap)


@dataclass
class EmbeddingTable:
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("embedding table must be 2-D")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding table has non-finite entries")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def save(self, path, vocab: Vocab) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for word, row in zip(vocab.words, self.vectors):
                fh.write(word + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_embeddings(source, vocab: Vocab, dim: int = 50, seed: int = 0) -> EmbeddingTable:
    """Build a |V| x dim table.

    ``source`` is a path to a ``word v1 ... vdim`` file or None. Rows not
    supplied by the file are drawn uniformly from [-0.5/dim, 0.5/dim] using a
    seeded stream, so the table is a pure function of (file, vocab, dim, seed).
    The PAD row is zero.
    """
    rng = stream(seed, "init.embed")
    bound = 0.5 / dim
    vectors = rng.uniform(-bound, bound, size=(len(vocab), dim))
    vectors[vocab.pad_id] = 0.0
    if source is not None:
        if not os.path.exists(source):
            raise FileNotFoundError(source)
        with open(source, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if not parts[0]:
                    continue
                if len(parts) - 1 != dim:
                    raise CorpusFormatError(source, lineno, f"expected {dim} values, got {len(parts) - 1}")
                i = vocab.index.get(parts[0])
                if i is None:
                    continue
                try:
                    vectors[i] = [float(v) for v in parts[1:]]
                except ValueError:
                    raise CorpusFormatError(source, lineno, "non-numeric value") from None
    return EmbeddingTable(vectors)
