"""Clean accuracy, robust accuracy, attack success rate and query counts,
plus the packaged experiments (ADA-only vs FADA-only, hyperparameter sweeps).

Only examples the model classifies correctly are attacked:

    ra  = (# correct and attack failed) / n_eval
    asr = (# attack succeeded) / n_attacked     (0 when nothing was attacked)

Query counts include the correctness check and the importance probes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from fadv import attack as A
from fadv import fada as F
from fadv import training as T
from fadv.rng import stream

SCHEMA = "fadv.defense_report/1"
CSV_COLUMNS = ("defense", "attack", "clean", "ra", "asr", "mean_queries")


@dataclass
class AttackEntry:
    ra: float
    asr: float
    mean_queries: float
    n_attacked: int
    n_eval: int
    n_success: int
    n_misclassified: int
    clean_sample_acc: float
    total_queries: int
    attack_config: dict = field(default_factory=dict)


@dataclass
class DefenseReport:
    defense: str
    clean_acc: float
    attacks: dict = field(default_factory=dict)  # name -> AttackEntry
    config: dict = field(default_factory=dict)
    seed: int = 0

    def records(self):
        for name, e in self.attacks.items():
            yield {"schema": SCHEMA, "defense": self.defense, "attack": name, "clean": self.clean_acc,
                   "queries_include_ranking": True, "seed": self.seed, "config": self.config, **asdict(e)}

    def write(self, jsonl_path, csv_path=None) -> None:
        with open(jsonl_path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        if csv_path is not None:
            write_csv(csv_path, [{"defense": self.defense, "attack": n, "clean": self.clean_acc, "ra": e.ra,
                                  "asr": e.asr, "mean_queries": e.mean_queries}
                                 for n, e in self.attacks.items()], CSV_COLUMNS)


def write_csv(path, rows, columns) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in columns})


def clean_accuracy(params, split, vocab) -> float:
    if not split:
        raise ValueError("clean_accuracy needs a non-empty split")
    return T.accuracy(params, vocab, split)


def sample_indices(n: int, sample_size: int, seed: int) -> np.ndarray:
    if sample_size > n:
        raise ValueError(f"sample_size {sample_size} > split size {n}")
    return np.sort(stream(seed, "sampling").choice(n, size=sample_size, replace=False))


def robust_evaluate(params, split, lexicon, attack_cfg, sample_size, seed, vocab, sim_embed=None,
                    counter=None, workers=1, outcomes_out=None) -> AttackEntry:
    """Attack a seeded sample of ``split`` and summarise.

    ``outcomes_out``, if a list, receives the per-example AttackOutcomes.
    """
    idx = sample_indices(len(split), sample_size, seed)
    sample = [split[i] for i in idx]
    outcomes = A.attack_many(params, sample, lexicon, attack_cfg, vocab, sim_embed, counter, workers)
    if outcomes_out is not None:
        outcomes_out.extend(outcomes)
    attacked = [o for o in outcomes if o.attempted]
    n_success = sum(o.success for o in attacked)
    n_wrong = len(outcomes) - len(attacked)
    n = len(outcomes)
    total_q = sum(o.queries for o in outcomes)
    return AttackEntry(
        ra=(len(attacked) - n_success) / n,
        asr=n_success / len(attacked) if attacked else 0.0,
        mean_queries=float(np.mean([o.queries for o in attacked])) if attacked else 0.0,
        n_attacked=len(attacked),
        n_eval=n,
        n_success=n_success,
        n_misclassified=n_wrong,
        clean_sample_acc=len(attacked) / n,
        total_queries=total_q,
        attack_config=asdict(attack_cfg),
    )


def evaluate_defense(name, params, split, lexicon, attacks: dict, sample_size, seed, vocab, sim_embed=None,
                     counter=None, workers=1, config=None) -> DefenseReport:
    """Clean accuracy on the whole split plus one AttackEntry per named AttackConfig."""
    report = DefenseReport(name, clean_accuracy(params, split, vocab), config=config or {}, seed=seed)
    for attack_name, cfg in attacks.items():
        report.attacks[attack_name] = robust_evaluate(params, split, lexicon, cfg, sample_size, seed, vocab,
                                                      sim_embed, counter, workers)
    return report


def figure1_experiment(corpus, vocab, lexicon, train_cfg: T.TrainConfig, attack_cfg: A.AttackConfig,
                       sim_embed=None, embed=None, workers=1, base=None) -> dict:
    """Train on adversarial-only vs friendly-only data generated against a natural base model.

    Returns train accuracy on each model's own training data and clean test
    accuracy, for natural / ada_only / fada_only, plus generation stats. Both
    augmentations come from one attack pass over the train split.
    """
    natural_cfg = replace(train_cfg, mode="natural")
    if base is None:
        base, _ = T.train(corpus.train, vocab, natural_cfg, num_classes=corpus.num_classes, embed=embed)
    outcomes = A.attack_many(base, corpus.train, lexicon, attack_cfg, vocab, sim_embed, workers=workers)
    ada = F.from_outcomes("ada", corpus.train, outcomes, attack_cfg, train_cfg.seed)
    fada = F.from_outcomes("fada", corpus.train, outcomes, attack_cfg, train_cfg.seed)
    rows = {"natural": {"train_acc": T.accuracy(base, vocab, corpus.train),
                        "test_acc": T.accuracy(base, vocab, corpus.test),
                        "n_train": len(corpus.train)}}
    models = {"natural": base}
    for mode, aug in (("ada_only", ada), ("fada_only", fada)):
        params, _ = T.train(corpus.train, vocab, replace(train_cfg, mode=mode), aug,
                            num_classes=corpus.num_classes, embed=embed)
        own = aug.sentences(derived_only=True)
        rows[mode] = {"train_acc": T.accuracy(params, vocab, own), "test_acc": T.accuracy(params, vocab, corpus.test),
                      "n_train": len(own)}
        models[mode] = params
    n_attacked = sum(1 for _, f in fada.pairs if "misclassified" not in f.flags)
    return {
        "outcomes": outcomes,
        "rows": rows,
        "generation": {"n_train": len(corpus.train), "n_attacked": n_attacked, "n_success": ada.meta["n_derived"],
                       "attack_config": asdict(attack_cfg)},
        "models": models,
        "augmentations": {"ada": ada, "fada": fada},
    }


SWEEP_KINDS = ("steps", "step_size", "epochs")
SWEEP_COLUMNS = ("kind", "setting", "clean", "ra", "asr", "mean_queries")


def sweep(kind, grid, base_cfg: T.TrainConfig, corpus, vocab, lexicon, attack_cfg, augmentation=None,
          sample_size=500, seed=0, sim_embed=None, embed=None, workers=1) -> list[dict]:
    """Train/evaluate one model per grid point (or one run, per epoch, for ``epochs``)."""
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    single_step = base_cfg.inner_method in ("fgm", "fgsm")
    if kind == "steps" and single_step and grid != [1]:
        raise T.ConfigError("a steps sweep needs a multi-step inner method (pgd or ascent)")
    if kind == "step_size" and single_step:
        raise T.ConfigError("fgm/fgsm ignore the step size; sweep it with pgd or ascent")

    def measure(setting, params):
        e = robust_evaluate(params, corpus.test, lexicon, attack_cfg, sample_size, seed, vocab, sim_embed,
                            workers=workers)
        return {"kind": kind, "setting": setting, "clean": T.accuracy(params, vocab, corpus.test), "ra": e.ra,
                "asr": e.asr, "mean_queries": e.mean_queries}

    def fit(cfg, on_epoch=None):
        return T.train(corpus.train, vocab, cfg, augmentation, num_classes=corpus.num_classes, embed=embed,
                       on_epoch=on_epoch)[0]

    rows = []
    if kind == "epochs":
        wanted = set(int(g) for g in grid)
        fit(replace(base_cfg, epochs=max(wanted)),
            lambda ep, p: rows.append(measure(ep, p)) if ep in wanted else None)
        return rows
    for value in grid:
        if kind == "steps":
            inner = replace(base_cfg.inner, steps=int(value))
        else:
            inner = replace(base_cfg.inner, alpha=float(value))
        rows.append(measure(value, fit(replace(base_cfg, inner=inner))))
    return rows


def metric_algebra_holds(entry: AttackEntry) -> bool:
    """ra * n_eval + misclassified + successes == n_eval (integer identity)."""
    return round(entry.ra * entry.n_eval) + entry.n_misclassified + entry.n_success == entry.n_eval

