import numpy as np
import pytest

from fadv import corpus as C
from fadv import model as M
from fadv import toydata
from fadv import training as T
from fadv.corpus import PAD, UNK, SynonymLexicon, Vocab
from fadv.rng import stream


def random_params(vocab_size=12, num_classes=2, dim=5, hidden=4, seed=0, scale=1.0):
    """Params with O(1) entries everywhere, so gradients are not tiny."""
    rng = stream(seed, "test.params")
    embed = rng.normal(0, scale, size=(vocab_size, dim))
    embed[0] = 0.0
    return M.ClassifierParams(
        embed,
        rng.normal(0, scale, size=(hidden, dim)),
        rng.normal(0, scale, size=hidden),
        rng.normal(0, scale, size=(num_classes, hidden)),
        rng.normal(0, scale, size=num_classes),
    )


SMALL_TOY = toydata.ToySpec(n_train=600, n_dev=100, n_test=300, concepts=8, filler_clusters=12, seed=3)


@pytest.fixture(scope="session")
def small_toy(tmp_path_factory):
    """A small synthetic corpus plus a natural model trained on it."""
    root = tmp_path_factory.mktemp("toy")
    toydata.write_toy_corpus(root, SMALL_TOY)
    corpus = C.load_corpus(root)
    vocab = C.build_vocab(corpus)
    lexicon = C.load_synonyms(root / "synonyms.tsv")
    sim = C.load_embeddings(str(root / "similarity.txt"), vocab, SMALL_TOY.dim)
    cfg = T.TrainConfig(epochs=10, lr=0.5)
    params, report = T.train(corpus.train, vocab, cfg, num_classes=corpus.num_classes)
    return {"root": root, "corpus": corpus, "vocab": vocab, "lexicon": lexicon, "sim": sim,
            "params": params, "report": report, "cfg": cfg}


def finite_diff(f, x, h=1e-5):
    """Central differences of scalar f with respect to every entry of array x (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


WORDS = [PAD, UNK, "great", "good", "fine", "awful", "bad", "n1", "n2"]
SCORES = {"great": 3.0, "good": 2.0, "fine": 1.0, "awful": -3.0, "bad": -2.0}


def score_model():
    """p(class 1) increases with the mean word score: logits = (-h, h), h = tanh(mean score / 4)."""
    vocab = Vocab.from_words(WORDS)
    embed = np.zeros((len(WORDS), 2))
    for w, s in SCORES.items():
        embed[vocab.index[w], 0] = s
    embed[vocab.unk_id, 1] = 1.0
    params = M.ClassifierParams(embed, [[0.25, 0.0]], [0.0], [[-1.0], [1.0]], [0.0, 0.0])
    return params, vocab


def lexicon(**entries):
    return SynonymLexicon({k: list(v) for k, v in entries.items()})


ONE_HOT = np.eye(len(WORDS))  # every substitution costs the same similarity


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
