"""Greedy adversarial word substitution.

Words are ranked by how much replacing them with UNK lowers the true-class
probability; each position in that order is tried with every synonym
candidate, the most damaging candidate is committed, and the search stops at
the first label flip. Three constraints bound the search: at most
``ceil(p_max * n)`` substitutions, mean-embedding cosine similarity to the
original of at least ``eps_min``, and at most ``k_syn`` candidates per word.

``queries`` counts every sentence scored by the model, including the initial
correctness check and the n importance probes.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from fadv import model as M
from fadv.corpus import EmbeddingTable, LabeledExample, SynonymLexicon, Vocab


class OracleScaleError(ValueError):
    """Instance too large for exhaustive search."""


@dataclass(frozen=True)
class AttackConfig:
    p_max: float = 0.15
    eps_min: float = 0.84
    k_syn: int = 50
    max_queries: int | None = None  # None -> 50 * n

    def __post_init__(self):
        if not 0 < self.p_max <= 1:
            raise ValueError("p_max must be in (0, 1]")
        if not 0 <= self.eps_min <= 1:
            raise ValueError("eps_min must be in [0, 1]")
        if self.k_syn < 0:
            raise ValueError("k_syn must be >= 0")

    def budget(self, n: int) -> int:
        # round first so 0.15 * 20 does not ceil to 4
        return math.ceil(round(self.p_max * n, 9))

    def query_limit(self, n: int) -> int:
        return 50 * n if self.max_queries is None else self.max_queries


@dataclass
class AttackOutcome:
    x_adv: tuple
    success: bool
    modifications: list = field(default_factory=list)  # (index, original_word, new_word)
    last_index: int | None = None
    last_original: str | None = None
    queries: int = 0
    truncated: bool = False
    attempted: bool = True
    trace: list = field(default_factory=list)  # (index, old, new, prob_label) per commit


def _sim_matrix(sim_embed, params):
    if sim_embed is None:
        return params.embed
    if isinstance(sim_embed, EmbeddingTable):
        return sim_embed.vectors
    return np.asarray(sim_embed, dtype=np.float64)


def _cosine(u, v):
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    denom = nu * nv
    dot = (u * v).sum(axis=-1)
    return np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)


def sentence_similarity(a, b, embed, vocab: Vocab | None = None) -> float:
    """Cosine similarity of the mean embedding vectors of two equal-length sentences.

    ``a`` and ``b`` are word sequences (``vocab`` required) or id arrays.
    Identical sentences score 1.0; a zero mean vector scores 0.0.
    """
    if len(a) != len(b):
        raise ValueError("sentences must have equal length")
    table = embed.vectors if isinstance(embed, EmbeddingTable) else np.asarray(embed)
    if vocab is not None:
        a, b = vocab.encode(a), vocab.encode(b)
    a, b = np.asarray(a), np.asarray(b)
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(_cosine(table[a].mean(axis=0), table[b].mean(axis=0)), -1.0, 1.0))


def _importance_probes(params, ids, label, unk_id, counter):
    probe = np.repeat(ids[None], len(ids), axis=0)
    np.fill_diagonal(probe, unk_id)
    return M.forward_batch(params, probe, counter=counter).probs[:, label]


def word_importance(params, ids, label, unk_id: int = 1, counter=None) -> list[int]:
    """Positions sorted by importance (p_label(x) - p_label(x with i -> UNK)), descending.

    Uses exactly one query per position: the ordering only depends on the
    probed probabilities, so the unperturbed probability is not needed.
    Ties go to the lower index.
    """
    ids = np.asarray(ids, dtype=np.int64)
    probs = _importance_probes(params, ids, label, unk_id, counter)
    return [int(i) for i in np.argsort(probs, kind="stable")]


def _candidates(lexicon, vocab, word, current, k_syn):
    cands = [c for c in lexicon[word] if c in vocab.index and c != current][:k_syn]
    return sorted(cands)


def greedy_aws(params, example: LabeledExample, lexicon: SynonymLexicon, cfg: AttackConfig,
               vocab: Vocab, sim_embed=None, counter=None) -> AttackOutcome:
    """Attack one example; ``sim_embed`` defaults to the model's own embeddings."""
    words = list(example.text)
    local = M.QueryCounter()
    try:
        return _greedy(params, words, example.label, lexicon, cfg, vocab, _sim_matrix(sim_embed, params), local)
    finally:
        if counter is not None:
            counter.add(local.count)


def _greedy(params, words, y, lexicon, cfg, vocab, sim, local):
    n = len(words)
    ids = vocab.encode(words)
    first = M.forward_batch(params, ids[None], counter=local)
    if int(np.argmax(first.logits[0])) != y:
        return AttackOutcome(tuple(words), False, queries=local.count, attempted=False)

    order = word_importance(params, ids, y, vocab.unk_id, local)
    budget = cfg.budget(n)
    limit = cfg.query_limit(n)
    cur = ids.copy()
    cur_words = list(words)
    p_cur = first.probs[0, y]
    orig_mean = sim[ids].mean(axis=0)
    cur_sum = sim[cur].sum(axis=0)
    mods, trace = [], []
    truncated = False

    for i in order:
        if len(mods) >= budget:
            break
        if local.count >= limit:
            truncated = True
            break
        cands = _candidates(lexicon, vocab, words[i], cur_words[i], cfg.k_syn)
        if not cands:
            continue
        cand_ids = vocab.encode(cands)
        sums = cur_sum - sim[cur[i]] + sim[cand_ids]
        ok = _cosine(sums / n, orig_mean[None]) >= cfg.eps_min
        cands = [c for c, k in zip(cands, ok) if k]
        cand_ids = cand_ids[ok]
        if not cands:
            continue
        room = limit - local.count
        if len(cands) > room:
            cands, cand_ids, truncated = cands[:room], cand_ids[:room], True
        batch = np.repeat(cur[None], len(cands), axis=0)
        batch[:, i] = cand_ids
        out = M.forward_batch(params, batch, counter=local)
        p = out.probs[:, y]
        best = int(np.argmin(p))  # first minimum = lexicographically smallest candidate
        if p[best] < p_cur:
            cur_sum = cur_sum - sim[cur[i]] + sim[cand_ids[best]]
            cur[i] = cand_ids[best]
            cur_words[i] = cands[best]
            p_cur = p[best]
            mods.append((int(i), words[i], cands[best]))
            trace.append((int(i), words[i], cands[best], float(p_cur)))
            if int(np.argmax(out.logits[best])) != y:
                return AttackOutcome(tuple(cur_words), True, mods, int(i), words[i], local.count, truncated, True, trace)
        if truncated:
            break
    return AttackOutcome(tuple(cur_words), False, mods, None, None, local.count, truncated, True, trace)


def brute_force_aws(params, example: LabeledExample, lexicon: SynonymLexicon, cfg: AttackConfig,
                    vocab: Vocab, sim_embed=None, counter=None, max_len=6, max_cands=3) -> AttackOutcome:
    """Exhaustive minimal-modification attack for tiny instances (test oracle).

    Enumerates every position subset of size 1..budget and every candidate
    assignment whose final sentence meets the similarity floor; returns the
    first flipping assignment of the smallest size.
    """
    words = list(example.text)
    y = example.label
    n = len(words)
    if n > max_len:
        raise OracleScaleError(f"sentence length {n} > {max_len}")
    sim = _sim_matrix(sim_embed, params)
    cand_lists = [_candidates(lexicon, vocab, w, w, cfg.k_syn) for w in words]
    if any(len(c) > max_cands for c in cand_lists):
        raise OracleScaleError(f"more than {max_cands} candidates for a word")
    local = M.QueryCounter()
    ids = vocab.encode(words)
    try:
        if predict_ids(params, ids, local) != y:
            return AttackOutcome(tuple(words), False, queries=local.count, attempted=False)
        orig_mean = sim[ids].mean(axis=0)
        for size in range(1, cfg.budget(n) + 1):
            for positions in itertools.combinations(range(n), size):
                if any(not cand_lists[i] for i in positions):
                    continue
                for choice in itertools.product(*(cand_lists[i] for i in positions)):
                    adv = ids.copy()
                    for i, c in zip(positions, choice):
                        adv[i] = vocab.index[c]
                    if _cosine(sim[adv].mean(axis=0), orig_mean) < cfg.eps_min:
                        continue
                    if predict_ids(params, adv, local) != y:
                        x_adv = list(words)
                        mods = []
                        for i, c in zip(positions, choice):
                            x_adv[i] = c
                            mods.append((i, words[i], c))
                        last = positions[-1]
                        return AttackOutcome(tuple(x_adv), True, mods, last, words[last], local.count)
        return AttackOutcome(tuple(words), False, queries=local.count)
    finally:
        if counter is not None:
            counter.add(local.count)


def predict_ids(params, ids, counter=None) -> int:
    return int(np.argmax(M.forward_batch(params, np.asarray(ids)[None], counter=counter).logits[0]))


# -- many examples ---------------------------------------------------------

_WORKER = {}


def _init_worker(params, lexicon, cfg, vocab, sim_embed):
    _WORKER.update(params=params, lexicon=lexicon, cfg=cfg, vocab=vocab, sim=sim_embed)


def _attack_chunk(examples):
    w = _WORKER
    return [greedy_aws(w["params"], ex, w["lexicon"], w["cfg"], w["vocab"], w["sim"]) for ex in examples]


def attack_many(params, examples, lexicon, cfg, vocab, sim_embed=None, counter=None, workers=1) -> list[AttackOutcome]:
    """Attack every example; results are in input order regardless of ``workers``."""
    examples = list(examples)
    if workers is None or workers <= 0:
        workers = os.cpu_count() or 1
    if workers == 1 or len(examples) < 2 * workers:
        return [greedy_aws(params, ex, lexicon, cfg, vocab, sim_embed, counter) for ex in examples]
    size = math.ceil(len(examples) / (4 * workers))
    chunks = [examples[i:i + size] for i in range(0, len(examples), size)]
    with ProcessPoolExecutor(workers, initializer=_init_worker,
                             initargs=(params, lexicon, cfg, vocab, sim_embed)) as pool:
        outcomes = [o for part in pool.map(_attack_chunk, chunks) for o in part]
    if counter is not None:
        counter.add(sum(o.queries for o in outcomes))
    return outcomes


def write_trace(path, outcomes) -> None:
    """Debug trace: one ``index<TAB>old<TAB>new<TAB>prob_label`` line per commit,
    with a ``# example k`` line before each attacked example."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, o in enumerate(outcomes):
            fh.write(f"# example {k} success={int(o.success)} queries={o.queries}\n")
            for i, old, new, p in o.trace:
                fh.write(f"{i}\t{old}\t{new}\t{p!r}\n")
