import numpy as np
import pytest

from fadv import corpus as C
from fadv.rng import stream


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_tokenize_lowercases_and_splits():
    assert C.tokenize("The  MOVIE\twas Good") == ["the", "movie", "was", "good"]
    assert C.detokenize(["a", "b"]) == "a b"


def test_read_examples_uses_last_tab_and_truncates(tmp_path):
    f = write(tmp_path / "c.tsv", "a b\tc d e\t1\n\nx y z\t0\n")
    ex = C.read_examples(f, max_len=2)
    assert ex == [C.LabeledExample(("a", "b"), 1), C.LabeledExample(("x", "y"), 0)]


@pytest.mark.parametrize("line,msg", [("no tab here", "TAB"), ("text\tpos", "not an integer"),
                                      ("text\t-1", "negative"), ("   \t1", "empty")])
def test_read_examples_reports_line(tmp_path, line, msg):
    f = write(tmp_path / "c.tsv", "fine\t0\n" + line + "\n")
    with pytest.raises(C.CorpusFormatError, match=msg) as err:
        C.read_examples(f, 40)
    assert err.value.lineno == 2


def test_load_corpus_directory_and_file(tmp_path):
    write(tmp_path / "train.tsv", "a b\t0\nb c\t2\n")
    write(tmp_path / "test.tsv", "a\t1\n")
    corp = C.load_corpus(tmp_path)
    assert len(corp.train) == 2 and corp.dev == [] and len(corp.test) == 1
    assert corp.num_classes == 3
    single = C.load_corpus(tmp_path / "train.tsv")
    assert single.test == [] and len(single.train) == 2


def test_load_corpus_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        C.load_corpus(tmp_path)
    write(tmp_path / "train.tsv", "\n\n")
    with pytest.raises(C.EmptyCorpusError):
        C.load_corpus(tmp_path)


def test_build_vocab_order_and_min_freq():
    corp = C.Corpus(train=[C.LabeledExample(("b", "a", "b"), 0), C.LabeledExample(("c", "a", "d"), 1)])
    v = C.build_vocab(corp)
    assert v.words == [C.PAD, C.UNK, "a", "b", "c", "d"]
    assert (v.pad_id, v.unk_id) == (0, 1)
    assert C.build_vocab(corp, min_freq=2).words == [C.PAD, C.UNK, "a", "b"]


def test_vocab_encode_decode_roundtrip(tmp_path):
    v = C.Vocab.from_words([C.PAD, C.UNK, "x", "y"])
    assert v.encode(["y", "zzz", "x"]).tolist() == [3, 1, 2]
    assert v.decode([2, 3]) == ["x", "y"]
    v.save(tmp_path / "v.txt")
    assert C.Vocab.load(tmp_path / "v.txt") == v
    with pytest.raises(ValueError):
        C.Vocab.from_words([C.PAD, C.UNK, "x", "x"])


def test_load_synonyms_cleans_and_caps(tmp_path):
    f = write(tmp_path / "s.tsv", "Good\tgreat,good,fine,great, nice\nbad\t\n")
    lex = C.load_synonyms(f, cap=2)
    assert lex["good"] == ["great", "fine"]
    assert lex["bad"] == []
    assert lex["absent"] == []


def test_load_synonyms_malformed(tmp_path):
    with pytest.raises(C.CorpusFormatError):
        C.load_synonyms(write(tmp_path / "s.tsv", "just-a-word\n"))


def test_lexicon_rejects_self_reference_and_overflow():
    with pytest.raises(ValueError):
        C.SynonymLexicon({"a": ["a"]})
    with pytest.raises(ValueError):
        C.SynonymLexicon({"a": ["b", "c"]}, cap=1)


def test_load_embeddings_defaults_and_file(tmp_path):
    v = C.Vocab.from_words([C.PAD, C.UNK, "x", "y"])
    t1 = C.load_embeddings(None, v, dim=3, seed=4)
    t2 = C.load_embeddings(None, v, dim=3, seed=4)
    assert np.array_equal(t1.vectors, t2.vectors)
    assert np.all(t1.vectors[0] == 0)
    assert np.all(np.abs(t1.vectors) <= 0.5 / 3)
    f = write(tmp_path / "e.txt", "x 1 2 3\nunused 4 5 6\n")
    t = C.load_embeddings(str(f), v, dim=3, seed=4)
    assert t.vectors[2].tolist() == [1.0, 2.0, 3.0]
    assert np.array_equal(t.vectors[3], t1.vectors[3])


def test_embedding_save_load_is_exact(tmp_path):
    v = C.Vocab.from_words([C.PAD, C.UNK, "x"])
    t = C.EmbeddingTable(stream(0, "t").normal(size=(3, 4)))
    t.save(tmp_path / "e.txt", v)
    assert np.array_equal(C.load_embeddings(str(tmp_path / "e.txt"), v, dim=4).vectors, t.vectors)


def test_load_embeddings_errors(tmp_path):
    v = C.Vocab.from_words([C.PAD, C.UNK, "x"])
    with pytest.raises(C.CorpusFormatError, match="expected 3 values"):
        C.load_embeddings(str(write(tmp_path / "e.txt", "x 1 2\n")), v, dim=3)
    with pytest.raises(FileNotFoundError):
        C.load_embeddings(str(tmp_path / "missing.txt"), v, dim=3)
