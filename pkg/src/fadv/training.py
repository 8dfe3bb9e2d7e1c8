"""Training loops: natural, augmented, gradient AT and GAT.

Modes
-----
natural    CE(X)
ada, fada  CE over train plus the attack-derived augmented sentences
ada_only,  CE over the attack-derived augmented sentences only
fada_only
at         CE(X) + CE(X~), X~ from the inner method on clean embeddings
gat        CE(X) + CE(X~) + CE(X~_f) on aligned (x, x_f) pairs; X_f is the
           static friendly augmentation, not regenerated per batch

Each term is a batch mean; the update uses the sum of the term gradients.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from fadv import innermax as I
from fadv import model as M
from fadv.rng import stream

MODES = ("natural", "ada", "fada", "ada_only", "fada_only", "at", "gat")
AUGMENTED_MODES = ("ada", "fada", "ada_only", "fada_only", "gat")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "natural"
    inner_method: str = "fgm"
    inner: I.PerturbationConfig = field(default_factory=I.PerturbationConfig)
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.5
    weight_decay: float = 0.0
    seed: int = 0
    dim: int = 50
    hidden: int = 64

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.inner_method not in I.METHODS:
            raise ConfigError(f"unknown inner method {self.inner_method!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")


@dataclass
class TrainReport:
    mode: str
    loss: list = field(default_factory=list)
    components: list = field(default_factory=list)  # per epoch: {"clean":, "adv":, "friendly":}
    train_acc: list = field(default_factory=list)
    dev_acc: list = field(default_factory=list)
    clean_term_batches: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    checkpoint_id: str | None = None

    def records(self):
        """Per-epoch dicts, without wall-clock (kept out so reports are reproducible)."""
        for e in range(len(self.loss)):
            yield {
                "epoch": e + 1,
                "mode": self.mode,
                "loss": self.loss[e],
                "components": self.components[e],
                "train_acc": self.train_acc[e],
                "dev_acc": self.dev_acc[e],
                "clean_term_batches": self.clean_term_batches[e],
            }

    def write(self, path, timing_path=None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        if timing_path is not None:
            with open(timing_path, "w", encoding="utf-8") as fh:
                for e, s in enumerate(self.epoch_seconds, 1):
                    fh.write(json.dumps({"epoch": e, "seconds": s}) + "\n")


def shuffle_and_batch(n: int, m: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Permutation of range(n) keyed by (seed, epoch), cut into batches of m (last may be short)."""
    order = stream(seed, "shuffle", epoch).permutation(n)
    return [order[i:i + m] for i in range(0, n, m)]


def _encode(vocab, examples):
    return [vocab.encode(ex.text) for ex in examples], np.array([ex.label for ex in examples], dtype=np.int64)


def accuracy(params, vocab, examples, batch=512) -> float:
    if not examples:
        raise ValueError("empty split")
    seqs, labels = _encode(vocab, examples)
    correct = 0
    for i in range(0, len(seqs), batch):
        ids = M.pad_batch(seqs[i:i + batch], params.pad_id)
        correct += int((M.predict_batch(params, ids) == labels[i:i + batch]).sum())
    return correct / len(seqs)


def _add(acc, grads, scale=1.0):
    for k, v in grads.param_grads.items():
        acc[k] = acc[k] + scale * v if k in acc else scale * v
    return acc


def training_pool(mode, train, augmentation):
    """(examples, friendly) used by ``mode``; ``friendly`` is aligned with examples for gat."""
    if mode in AUGMENTED_MODES and augmentation is None:
        raise ConfigError(f"mode {mode!r} needs an augmentation dataset")
    if mode in ("ada", "fada", "ada_only", "fada_only") and augmentation.kind != mode.split("_")[0]:
        raise ConfigError(f"mode {mode!r} needs a {mode.split('_')[0]} augmentation, got {augmentation.kind}")
    if mode in ("natural", "at"):
        return list(train), None
    if mode in ("ada", "fada"):
        return list(train) + augmentation.sentences(derived_only=True), None
    if mode in ("ada_only", "fada_only"):
        return augmentation.sentences(derived_only=True), None
    sources = [src for src, _ in augmentation.pairs]
    return sources, augmentation.sentences()


def train(train_examples, vocab, cfg: TrainConfig, augmentation=None, num_classes=2, embed=None,
          dev=None, on_epoch=None, refresh=None, init=None):
    """Train from a seeded initialisation and return (params, TrainReport).

    ``embed`` optionally initialises the embedding table; ``init`` (params)
    replaces the whole initialisation, e.g. to continue from a base model. ``on_epoch(epoch,
    params)`` is called after each epoch. ``refresh(params)``, when given,
    returns a new augmentation at the start of every epoch after the first
    (dynamic FADA); by default the augmentation is static.
    """
    pool, friendly = training_pool(cfg.mode, train_examples, augmentation)
    if not pool:
        raise ConfigError("training pool is empty")
    if init is not None:
        params = init.copy()
    else:
        params = M.init_params(len(vocab), num_classes, cfg.dim, cfg.hidden, cfg.seed,
                               None if embed is None else getattr(embed, "vectors", embed), vocab.pad_id)
    report = TrainReport(cfg.mode)
    seqs, labels = _encode(vocab, pool)
    fseqs = _encode(vocab, friendly)[0] if friendly is not None else None
    adversarial = cfg.mode in ("at", "gat")

    for epoch in range(1, cfg.epochs + 1):
        if refresh is not None and epoch > 1:
            augmentation = refresh(params)
            pool, friendly = training_pool(cfg.mode, train_examples, augmentation)
            seqs, labels = _encode(vocab, pool)
            fseqs = _encode(vocab, friendly)[0] if friendly is not None else None
        t0 = time.perf_counter()
        sums = {"clean": 0.0, "adv": 0.0, "friendly": 0.0}
        clean_batches = 0
        for idx in shuffle_and_batch(len(seqs), cfg.batch_size, cfg.seed, epoch):
            m = len(idx)
            ids = M.pad_batch([seqs[i] for i in idx], vocab.pad_id)
            y = labels[idx]
            grads = {}
            trace = M.forward_batch(params, ids)
            sums["clean"] += float(M.loss_ce(trace, y).sum())
            _add(grads, M.backward_batch(params, trace, y), 1.0 / m)
            clean_batches += 1
            if adversarial:
                delta = I.perturb_batch(params, ids, y, cfg.inner_method, cfg.inner)
                trace = M.forward_batch(params, ids, delta)
                sums["adv"] += float(M.loss_ce(trace, y).sum())
                _add(grads, M.backward_batch(params, trace, y), 1.0 / m)
            if cfg.mode == "gat":
                fids = M.pad_batch([fseqs[i] for i in idx], vocab.pad_id)
                delta = I.perturb_batch(params, fids, y, cfg.inner_method, cfg.inner)
                trace = M.forward_batch(params, fids, delta)
                sums["friendly"] += float(M.loss_ce(trace, y).sum())
                _add(grads, M.backward_batch(params, trace, y), 1.0 / m)
            params = M.sgd_step(params, grads, cfg.lr, cfg.weight_decay)
        comps = {k: v / len(seqs) for k, v in sums.items()}
        report.components.append(comps)
        report.loss.append(comps["clean"] + comps["adv"] + comps["friendly"])
        report.clean_term_batches.append(clean_batches)
        report.train_acc.append(accuracy(params, vocab, pool))
        report.dev_acc.append(accuracy(params, vocab, dev) if dev else None)
        report.epoch_seconds.append(time.perf_counter() - t0)
        if not params.is_finite():
            raise FloatingPointError(f"parameters became non-finite in epoch {epoch}")
        if on_epoch is not None:
            on_epoch(epoch, params)
    return params, report


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
