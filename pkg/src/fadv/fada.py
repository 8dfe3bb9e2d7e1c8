"""Friendly adversarial data augmentation.

A friendly example is the greedy attack's adversarial sentence with its last
substitution reverted to the original word: one edit short of crossing the
generating model's decision boundary. When the attack produces no
substitution record (failure, truncation without a flip, or an input the
model already misclassifies) the original sentence is returned unchanged.

Note on the attack contract: ``AttackOutcome.last_original`` is the ORIGINAL
word at the last modified index, which is what makes the revert land back on
the pre-flip sentence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from fadv import attack as A
from fadv.corpus import LabeledExample, detokenize, tokenize

SCHEMA = "fadv.augmentation/1"


@dataclass(frozen=True)
class FriendlyExample:
    x_f: tuple
    source: LabeledExample
    derived_from_attack: bool = False
    reverted_index: int | None = None
    flags: tuple = ()


@dataclass
class AugmentedDataset:
    kind: str  # "fada" or "ada"
    pairs: list  # (LabeledExample, FriendlyExample)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def sentences(self, derived_only=False) -> list[LabeledExample]:
        """Augmented sentences labelled with their source label."""
        return [LabeledExample(f.x_f, src.label) for src, f in self.pairs
                if f.derived_from_attack or not derived_only]


def _flags(outcome: A.AttackOutcome) -> tuple:
    if not outcome.attempted:
        return ("misclassified",)
    flags = ["success" if outcome.success else "failed"]
    if outcome.truncated:
        flags.append("truncated")
    return tuple(flags)


def friendly_from_outcome(example: LabeledExample, outcome: A.AttackOutcome) -> FriendlyExample:
    if outcome.last_original is None:
        return FriendlyExample(tuple(example.text), example, False, None, _flags(outcome))
    x_f = list(outcome.x_adv)
    x_f[outcome.last_index] = outcome.last_original
    return FriendlyExample(tuple(x_f), example, True, outcome.last_index, _flags(outcome))


def adversarial_from_outcome(example: LabeledExample, outcome: A.AttackOutcome) -> FriendlyExample:
    if not outcome.success:
        return FriendlyExample(tuple(example.text), example, False, None, _flags(outcome))
    return FriendlyExample(tuple(outcome.x_adv), example, True, None, _flags(outcome))


def generate_friendly(params, example, lexicon, cfg, vocab, sim_embed=None, counter=None) -> FriendlyExample:
    outcome = A.greedy_aws(params, example, lexicon, cfg, vocab, sim_embed, counter)
    return friendly_from_outcome(example, outcome)


def config_hash(cfg: A.AttackConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def from_outcomes(kind, split, outcomes, cfg, seed=0, checkpoint_id=None) -> AugmentedDataset:
    """Build a "fada" or "ada" dataset from attack outcomes already computed on ``split``."""
    convert = {"fada": friendly_from_outcome, "ada": adversarial_from_outcome}[kind]
    split = list(split)
    if len(split) != len(outcomes):
        raise ValueError("one outcome per example expected")
    pairs = [(ex, convert(ex, o)) for ex, o in zip(split, outcomes)]
    meta = {
        "schema": SCHEMA,
        "kind": kind,
        "attack_config": asdict(cfg),
        "attack_config_hash": config_hash(cfg),
        "checkpoint_id": checkpoint_id,
        "seed": int(seed),
        "n": len(pairs),
        "n_derived": sum(f.derived_from_attack for _, f in pairs),
    }
    return AugmentedDataset(kind, pairs, meta)


def augment_dataset(params, split, lexicon, cfg, vocab, sim_embed=None, seed=0, checkpoint_id=None,
                    counter=None, workers=1) -> AugmentedDataset:
    """One friendly example per source example, in input order."""
    outcomes = A.attack_many(params, split, lexicon, cfg, vocab, sim_embed, counter, workers)
    return from_outcomes("fada", split, outcomes, cfg, seed, checkpoint_id)


def generate_ada(params, split, lexicon, cfg, vocab, sim_embed=None, seed=0, checkpoint_id=None,
                 counter=None, workers=1) -> AugmentedDataset:
    """Like ``augment_dataset`` but keeps the adversarial sentence (no revert)."""
    outcomes = A.attack_many(params, split, lexicon, cfg, vocab, sim_embed, counter, workers)
    return from_outcomes("ada", split, outcomes, cfg, seed, checkpoint_id)


def hamming(a, b) -> int:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return sum(x != y for x, y in zip(a, b))


# -- file format -----------------------------------------------------------
# header:  # {json metadata}
# rows:    orig_text<TAB>augmented_text<TAB>label<TAB>flags
# flags:   comma list of success|failed|misclassified|truncated, plus derived
#          and rev=<i> for reverted friendly examples

def save_augmentation(aug: AugmentedDataset, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# " + json.dumps(aug.meta, sort_keys=True) + "\n")
            for src, f in aug.pairs:
                flags = list(f.flags)
                if f.derived_from_attack:
                    flags.append("derived")
                if f.reverted_index is not None:
                    flags.append(f"rev={f.reverted_index}")
                fh.write(f"{detokenize(src.text)}\t{detokenize(f.x_f)}\t{src.label}\t{','.join(flags)}\n")
    except OSError as e:
        raise OSError(f"cannot write augmentation file {path}: {e}") from e


def load_augmentation(path) -> AugmentedDataset:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot read augmentation file {path}: {e}") from e
    with fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata header")
        meta = json.loads(first[2:])
        pairs = []
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            orig, aug, label, flags = parts
            flags = [f for f in flags.split(",") if f]
            rev = next((int(f[4:]) for f in flags if f.startswith("rev=")), None)
            derived = "derived" in flags
            plain = tuple(f for f in flags if f != "derived" and not f.startswith("rev="))
            src = LabeledExample(tuple(tokenize(orig)), int(label))
            pairs.append((src, FriendlyExample(tuple(tokenize(aug)), src, derived, rev, plain)))
    return AugmentedDataset(meta.get("kind", "fada"), pairs, meta)
