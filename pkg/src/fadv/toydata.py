"""Seeded synthetic binary-sentiment corpus with a synonym lexicon.

The vocabulary is made of sentiment *concepts* (a frequent head word plus a
few rarely used synonyms) and neutral filler clusters. A sentence of label y
carries ``n_polar`` words from concepts of polarity y, sometimes one word of
the opposite polarity, and fillers. Some concept heads list an
opposite-polarity head among their synonym candidates, mimicking
embedding-neighbour lexicons in which antonyms sit close to each other.

Alongside the corpus the generator writes a similarity embedding file in
which synonyms are near-duplicates, antonym heads are moderately close and
fillers are unrelated; it plays the role of the sentence encoder behind the
attack's similarity constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fadv.corpus import LabeledExample, write_examples
from fadv.rng import stream


@dataclass(frozen=True)
class ToySpec:
    n_train: int = 3000
    n_dev: int = 400
    n_test: int = 1000
    concepts: int = 12          # per polarity
    synonyms: int = 2           # rare variants per concept
    antonym_frac: float = 0.4   # fraction of concepts whose head lists an antonym head
    filler_clusters: int = 40
    filler_size: int = 4
    min_len: int = 10
    max_len: int = 16
    n_polar: int = 3
    noise_prob: float = 0.0     # chance of one opposite-polarity word
    synonym_rate: float = 0.15  # chance a polar word is drawn from the rare variants
    dim: int = 50
    seed: int = 0


def _concept_words(polarity, c, spec):
    head = f"{polarity}{c}"
    return [head] + [f"{head}{chr(ord('a') + s)}" for s in range(spec.synonyms)]


def build_lexicon_words(spec: ToySpec):
    """Return (concepts, fillers, antonym map, lexicon dict)."""
    rng = stream(spec.seed, "toy.lexicon")
    concepts = {p: [_concept_words(p, c, spec) for c in range(spec.concepts)] for p in ("pos", "neg")}
    fillers = [[f"w{k}{chr(ord('a') + j)}" for j in range(spec.filler_size)] for k in range(spec.filler_clusters)]
    n_linked = int(round(spec.antonym_frac * spec.concepts))
    pos_linked = rng.permutation(spec.concepts)[:n_linked]
    neg_linked = rng.permutation(spec.concepts)[:n_linked]
    antonym = {}
    for a, b in zip(pos_linked, neg_linked):
        antonym[concepts["pos"][a][0]] = concepts["neg"][b][0]
        antonym[concepts["neg"][b][0]] = concepts["pos"][a][0]
    lexicon = {}
    for p in ("pos", "neg"):
        for words in concepts[p]:
            for w in words:
                cands = [v for v in words if v != w]
                if w in antonym:
                    cands.append(antonym[w])
                lexicon[w] = cands
    for cluster in fillers:
        for w in cluster:
            lexicon[w] = [v for v in cluster if v != w]
    return concepts, fillers, antonym, lexicon


def _sentence(rng, label, concepts, fillers, spec):
    pol, opp = ("pos", "neg") if label == 1 else ("neg", "pos")
    n = int(rng.integers(spec.min_len, spec.max_len + 1))

    def polar(p):
        words = concepts[p][int(rng.integers(len(concepts[p])))]
        if rng.random() < spec.synonym_rate:
            return words[1 + int(rng.integers(spec.synonyms))]
        return words[0]

    tokens = [polar(pol) for _ in range(spec.n_polar)]
    if rng.random() < spec.noise_prob:
        tokens.append(polar(opp))
    while len(tokens) < n:
        cluster = fillers[int(rng.integers(len(fillers)))]
        tokens.append(cluster[int(rng.integers(len(cluster)))])
    rng.shuffle(tokens)
    return LabeledExample(tuple(tokens), label)


def generate(spec: ToySpec):
    """Return (splits dict, lexicon dict, similarity vectors dict)."""
    concepts, fillers, antonym, lexicon = build_lexicon_words(spec)
    splits = {}
    for name, size in (("train", spec.n_train), ("dev", spec.n_dev), ("test", spec.n_test)):
        rng = stream(spec.seed, "toy." + name)
        labels = rng.permutation(np.arange(size) % 2)
        splits[name] = [_sentence(rng, int(y), concepts, fillers, spec) for y in labels]
    return splits, lexicon, similarity_vectors(spec, concepts, fillers, antonym)


def _unit(v):
    return v / np.linalg.norm(v)


def similarity_vectors(spec, concepts, fillers, antonym):
    rng = stream(spec.seed, "toy.similarity")
    vec = {}
    base = {}
    for p in ("pos", "neg"):
        for words in concepts[p]:
            base[words[0]] = _unit(rng.normal(size=spec.dim))
    for a, b in sorted(antonym.items()):
        if a.startswith("neg"):
            base[a] = _unit(0.8 * base[b] + 0.6 * _unit(rng.normal(size=spec.dim)))
    for p in ("pos", "neg"):
        for words in concepts[p]:
            for w in words:
                vec[w] = _unit(base[words[0]] + 0.15 * rng.normal(size=spec.dim))
    for cluster in fillers:
        b = _unit(rng.normal(size=spec.dim))
        for w in cluster:
            vec[w] = _unit(b + 0.15 * rng.normal(size=spec.dim))
    return vec


def write_toy_corpus(out_dir, spec: ToySpec = ToySpec()) -> dict:
    """Write train/dev/test.tsv, synonyms.tsv and similarity.txt into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits, lexicon, vectors = generate(spec)
    for name, examples in splits.items():
        write_examples(out / f"{name}.tsv", examples)
    with open(out / "synonyms.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for w in sorted(lexicon):
            fh.write(f"{w}\t{','.join(lexicon[w])}\n")
    with open(out / "similarity.txt", "w", encoding="utf-8", newline="\n") as fh:
        for w in sorted(vectors):
            fh.write(w + " " + " ".join(repr(float(v)) for v in vectors[w]) + "\n")
    return {name: str(out / f"{name}.tsv") for name in splits} | {
        "synonyms": str(out / "synonyms.tsv"), "similarity": str(out / "similarity.txt")}
