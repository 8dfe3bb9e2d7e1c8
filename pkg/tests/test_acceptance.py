"""Acceptance checks 1-8, each at its stated tolerance.

Every test records one PASS/FAIL line, shown in the terminal summary.
Criteria 3, 5, 6 and 7 share one experiment on the default synthetic corpus
(``fadv toy`` with seed 0): natural training, one attack pass over train, the
adversarial-only / friendly-only models, GAT with FGM and with 10-step
unprojected ascent, and 500-example robust evaluation of the natural and
GAT models.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, finite_diff, random_params
from fadv import attack as A
from fadv import cli
from fadv import corpus as C
from fadv import evaluation as E
from fadv import fada as F
from fadv import innermax as I
from fadv import model as M
from fadv import toydata
from fadv import training as T
from fadv.corpus import PAD, UNK, LabeledExample, SynonymLexicon, Vocab
from fadv.rng import stream

TRAIN = T.TrainConfig(epochs=20, lr=0.5, batch_size=64, inner=I.PerturbationConfig(epsilon=0.03, alpha=0.003))
ATTACK = A.AttackConfig(p_max=0.15, eps_min=0.84, k_syn=50)
SAMPLE = 500


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


# -- 1 ----------------------------------------------------------------------

def test_criterion_1_gradients_match_finite_differences():
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for k in range(20):
        rng = stream(k, "acceptance.fd")
        p = random_params(vocab_size=10, num_classes=int(rng.integers(2, 4)), dim=4, hidden=5, seed=100 + k)
        ids = rng.integers(1, 10, size=int(rng.integers(1, 7)))
        label = int(rng.integers(p.num_classes))
        delta = rng.normal(0, 0.3, size=(ids.size, 4))
        g = M.backward(p, M.forward(p, ids, delta), label)

        def loss():
            return M.loss_ce(M.forward(p, ids, delta), label)

        pairs = [(g.input_grad, finite_diff(loss, delta))]
        pairs += [(g.param_grads[name], finite_diff(loss, arr)) for name, arr in p.tensors().items()]
        for analytic, numeric in pairs:
            mask = np.abs(numeric) > 1e-7
            if mask.any():
                rel = np.abs(analytic[mask] - numeric[mask]) / np.abs(numeric[mask])
                worst = max(worst, float(rel.max()))
                checked += int(mask.sum())
    elapsed = time.perf_counter() - start
    record(1, worst < 1e-4 and elapsed < 10,
           f"20 triples, {checked} coordinates, max rel err {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 10s)")


# -- 2 ----------------------------------------------------------------------

def test_criterion_2_perturbation_invariants():
    rng = stream(0, "acceptance.perturb")
    fgsm_ok = fgm_ok = idem_ok = True
    fgm_err = 0.0
    for _ in range(200):
        g = rng.normal(size=(int(rng.integers(1, 8)), 5))
        g[rng.random(g.shape) < 0.2] = 0.0
        e = float(rng.uniform(0.01, 5))
        d = I.fgsm(g, e)
        fgsm_ok &= bool(np.all(d == np.where(g > 0, e, np.where(g < 0, -e, 0.0))))
        if np.linalg.norm(g) > 0:
            fgm_err = max(fgm_err, abs(np.linalg.norm(I.fgm(g, e)) - e))
        for norm in I.NORMS:
            p = I.project(rng.normal(0, 3, size=g.shape), e, norm)
            idem_ok &= bool(np.array_equal(I.project(p, e, norm), p))
    fgm_ok = fgm_err <= 1e-9

    worst = {"l2": -np.inf, "linf": -np.inf}
    for norm in I.NORMS:
        for trial in range(10):
            cfg = I.PerturbationConfig(epsilon=float(rng.uniform(0.01, 2)), alpha=float(rng.uniform(0.01, 2)),
                                       norm=norm, project=True)
            d = np.zeros((6, 5))
            for _ in range(50):  # 2 norms x 10 trials x 50 steps = 1000 steps
                d = I.pgd_step(d, rng.normal(size=d.shape), cfg)
                size = np.linalg.norm(d) if norm == "l2" else np.abs(d).max()
                worst[norm] = max(worst[norm], size - cfg.epsilon)
    pgd_ok = worst["l2"] <= 1e-9 and worst["linf"] <= 1e-12
    record(2, fgsm_ok and fgm_ok and pgd_ok and idem_ok,
           f"fgsm exact={fgsm_ok}, fgm max |norm-eps|={fgm_err:.1e}, pgd max excess l2={worst['l2']:.1e} "
           f"linf={worst['linf']:.1e} over 1000 steps, projection idempotent={idem_ok}")


# -- 4 ----------------------------------------------------------------------

def _tiny_instance(k):
    rng = stream(k, "acceptance.oracle")
    params = random_params(vocab_size=10, dim=3, hidden=3, seed=1000 + k)
    vocab = Vocab.from_words([PAD, UNK] + [f"w{i}" for i in range(8)])
    entries = {}
    for i in range(8):
        others = [j for j in range(8) if j != i]
        entries[f"w{i}"] = [f"w{j}" for j in rng.choice(others, size=int(rng.integers(0, 4)), replace=False)]
    n = int(rng.integers(1, 7))
    text = tuple(f"w{i}" for i in rng.integers(0, 8, size=n))
    label = A.predict_ids(params, vocab.encode(text)) if rng.random() < 0.9 else int(rng.integers(2))
    cfg = A.AttackConfig(p_max=float(rng.choice([0.15, 0.34, 0.5, 1.0])), eps_min=float(rng.choice([0.0, 0.6, 0.9])))
    return params, vocab, SynonymLexicon(entries), LabeledExample(text, label), cfg


def test_criterion_4_greedy_never_beats_the_oracle():
    start = time.perf_counter()
    greedy_wins = oracle_wins = violations = 0
    for k in range(200):
        params, vocab, lex, ex, cfg = _tiny_instance(k)
        g = A.greedy_aws(params, ex, lex, cfg, vocab)
        o = A.brute_force_aws(params, ex, lex, cfg, vocab)
        greedy_wins += g.success
        oracle_wins += o.success
        if g.success and (not o.success or len(o.modifications) > len(g.modifications)):
            violations += 1
    elapsed = time.perf_counter() - start
    record(4, violations == 0 and elapsed < 60,
           f"200 instances, greedy successes {greedy_wins}, oracle successes {oracle_wins}, "
           f"violations {violations}, {elapsed:.1f}s (< 60s)")


# -- shared experiment (3, 5, 6, 7) ------------------------------------------

@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    spec = toydata.ToySpec(seed=0)
    toydata.write_toy_corpus(root, spec)
    corpus = C.load_corpus(root)
    vocab = C.build_vocab(corpus)
    lexicon = C.load_synonyms(root / "synonyms.tsv")
    sim = C.load_embeddings(str(root / "similarity.txt"), vocab, spec.dim)

    start = time.perf_counter()
    fig = E.figure1_experiment(corpus, vocab, lexicon, TRAIN, ATTACK, sim)
    fig_seconds = time.perf_counter() - start

    base = fig["models"]["natural"]
    fada = fig["augmentations"]["fada"]
    gat_fgm, _ = T.train(corpus.train, vocab, replace(TRAIN, mode="gat", inner_method="fgm"), fada)
    ascent = replace(TRAIN, mode="gat", inner_method="ascent",
                     inner=I.PerturbationConfig(epsilon=0.03, alpha=0.003, steps=10, project=False))
    gat_ascent, _ = T.train(corpus.train, vocab, ascent, fada)

    reports, counters = {}, {}
    for name, params in (("natural", base), ("gat_fgm", gat_fgm), ("gat_ascent10", gat_ascent)):
        counters[name] = M.QueryCounter()
        reports[name] = E.evaluate_defense(name, params, corpus.test, lexicon, {"aws": ATTACK}, SAMPLE, 0, vocab,
                                           sim, counters[name])
    return {"corpus": corpus, "vocab": vocab, "fig": fig, "fig_seconds": fig_seconds, "reports": reports,
            "counters": counters}


def test_criterion_3_friendly_examples_sit_on_the_right_side(experiment):
    fig, vocab = experiment["fig"], experiment["vocab"]
    base = fig["models"]["natural"]
    n = friendly_ok = adv_ok = hamming_ok = 0
    for ex, out in zip(experiment["corpus"].train, fig["outcomes"]):
        if not out.success or out.truncated:
            continue
        f = F.friendly_from_outcome(ex, out)
        n += 1
        friendly_ok += M.predict(base, vocab.encode(f.x_f)) == ex.label
        adv_ok += M.predict(base, vocab.encode(out.x_adv)) != ex.label
        hamming_ok += F.hamming(ex.text, f.x_f) == F.hamming(ex.text, out.x_adv) - 1
    record(3, n >= 200 and friendly_ok == adv_ok == hamming_ok == n,
           f"{n} successful attacks (>= 200): friendly keep label {friendly_ok}/{n}, "
           f"adversarial flip {adv_ok}/{n}, hamming(x,x_f) = hamming(x,x_adv)-1 {hamming_ok}/{n}")


def test_criterion_5_adversarial_only_vs_friendly_only(experiment):
    rows = experiment["fig"]["rows"]
    nat, ada, fada = (rows[m]["test_acc"] for m in ("natural", "ada_only", "fada_only"))
    ada_train, fada_train = rows["ada_only"]["train_acc"], rows["fada_only"]["train_acc"]
    n_train = len(experiment["corpus"].train)
    ok = (ada <= fada - 0.20 and abs(fada - nat) <= 0.03 and ada_train >= 0.95 and fada_train >= 0.95
          and n_train >= 2000 and experiment["fig_seconds"] < 900)
    record(5, ok,
           f"test acc natural {nat:.3f}, ada_only {ada:.3f}, fada_only {fada:.3f} (gap {fada - ada:+.3f} >= 0.20, "
           f"|fada-natural| {abs(fada - nat):.3f} <= 0.03); train acc on own data ada {ada_train:.3f}, "
           f"fada {fada_train:.3f} (>= 0.95); {n_train} train examples; {experiment['fig_seconds']:.0f}s (< 900s)")


def test_criterion_6_gat_beats_natural_training(experiment):
    r = experiment["reports"]
    nat, fgm, asc = (r[k].attacks["aws"].ra for k in ("natural", "gat_fgm", "gat_ascent10"))
    clean_gap = abs(r["gat_fgm"].clean_acc - r["natural"].clean_acc)
    ok = fgm >= nat + 0.10 and clean_gap <= 0.02 and asc >= fgm - 0.02
    record(6, ok,
           f"RA natural {nat:.3f}, GAT_FGM {fgm:.3f} (gain {fgm - nat:+.3f} >= 0.10), "
           f"GAT ascent-10 {asc:.3f} (>= GAT_FGM - 0.02); clean natural {r['natural'].clean_acc:.3f}, "
           f"GAT_FGM {r['gat_fgm'].clean_acc:.3f} (gap {clean_gap:.3f} <= 0.02); n_eval {SAMPLE}")


def test_criterion_7_metric_algebra_and_query_totals(experiment):
    worst, algebra, queries = 0.0, True, True
    for name, rep in experiment["reports"].items():
        e = rep.attacks["aws"]
        worst = max(worst, abs(e.ra - e.clean_sample_acc * (1 - e.asr)))
        algebra &= E.metric_algebra_holds(e)
        queries &= e.total_queries == experiment["counters"][name].count
    ok = worst <= 1 / SAMPLE and algebra and queries
    record(7, ok, f"3 reports: max |ra - clean*(1-asr)| {worst:.2e} (<= {1 / SAMPLE}), integer identity {algebra}, "
                  f"query totals equal counter {queries}")


# -- 8 ----------------------------------------------------------------------

def test_criterion_8_end_to_end_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    toydata.write_toy_corpus("data", toydata.ToySpec(n_train=400, n_dev=100, n_test=200, seed=5))
    common = ["--data", "data", "--synonyms", "data/synonyms.tsv", "--similarity", "data/similarity.txt",
              "--epochs", "10", "--sample_size", "100", "--workers", "2", "--plots", "false"]
    codes = [cli.main(["pipeline", *common, "--run_dir", d]) for d in ("one", "two")]
    files = ["natural.ckpt", "gat.ckpt", "fada.tsv", "report.jsonl", "report.csv", "natural_report.jsonl",
             "gat_report.jsonl"]
    same = [f for f in files if (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()]
    record(8, codes == [0, 0] and len(same) == len(files),
           f"two pipeline runs: {len(same)}/{len(files)} primary artifacts byte-identical "
           f"(checkpoints, augmentation, reports)")
