"""Mean-pooled bag-of-embeddings classifier with hand-written backprop.

    pooled = mean_{non-pad i}(E[ids_i] + delta_i)
    hidden = tanh(W1 @ pooled + b1)
    logits = W2 @ hidden + b2
    probs  = softmax(logits)

Everything is float64. The batched functions (``forward_batch``,
``backward_batch``) are the workhorses; ``forward`` / ``backward`` are the
single-sentence views used by attacks and tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from fadv.rng import stream

PROB_FLOOR = 1e-12
PARAM_NAMES = ("embed", "W1", "b1", "W2", "b2")
_MAGIC = b"FADVCKPT 1\n"


class QueryCounter:
    """Counts model evaluations (one per sentence scored)."""

    def __init__(self):
        self.count = 0

    def add(self, n=1):
        self.count += int(n)


@dataclass
class ClassifierParams:
    embed: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    pad_id: int = 0

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        hidden, dim = self.W1.shape
        if self.embed.shape[1] != dim or self.b1.shape != (hidden,):
            raise ValueError("inconsistent first-layer shapes")
        if self.W2.shape[1] != hidden or self.b2.shape != (self.W2.shape[0],):
            raise ValueError("inconsistent output-layer shapes")

    @property
    def dim(self):
        return self.W1.shape[1]

    @property
    def hidden(self):
        return self.W1.shape[0]

    @property
    def num_classes(self):
        return self.W2.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(**{k: v.copy() for k, v in self.tensors().items()}, pad_id=self.pad_id)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors().values())


def init_params(vocab_size, num_classes, dim=50, hidden=64, seed=0, embed=None, pad_id=0) -> ClassifierParams:
    """Seeded initialisation; ``embed`` (a |V| x dim array) overrides the random table."""
    rng = stream(seed, "init.params")
    if embed is None:
        bound = 0.5 / dim
        embed = stream(seed, "init.embed").uniform(-bound, bound, size=(vocab_size, dim))
        embed[pad_id] = 0.0
    embed = np.array(embed, dtype=np.float64)
    if embed.shape != (vocab_size, dim):
        raise ValueError(f"embed shape {embed.shape} != {(vocab_size, dim)}")
    W1 = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden, dim))
    W2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(num_classes, hidden))
    return ClassifierParams(embed, W1, np.zeros(hidden), W2, np.zeros(num_classes), pad_id=pad_id)


@dataclass
class ForwardTrace:
    """Intermediate values of one forward pass.

    Arrays carry a leading batch axis when produced by ``forward_batch``.
    """

    ids: np.ndarray
    mask: np.ndarray
    input_embeds: np.ndarray
    pooled: np.ndarray
    hidden_pre: np.ndarray
    hidden_post: np.ndarray
    logits: np.ndarray
    probs: np.ndarray

    @property
    def batched(self):
        return self.ids.ndim == 2


@dataclass
class Gradients:
    param_grads: dict[str, np.ndarray]
    input_grad: np.ndarray


def pad_batch(seqs, pad_id=0) -> np.ndarray:
    """Right-pad a list of id sequences into a (B, L) array."""
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), pad_id, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_batch(params: ClassifierParams, ids, delta=None, counter: QueryCounter | None = None) -> ForwardTrace:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2 or ids.shape[1] == 0:
        raise ValueError("ids must be a non-empty (B, L) array")
    mask = ids != params.pad_id
    x = params.embed[ids]
    if delta is not None:
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape != x.shape:
            raise ValueError(f"delta shape {delta.shape} != input shape {x.shape}")
        x = x + delta
    m = mask[..., None].astype(np.float64)
    counts = np.maximum(mask.sum(axis=1), 1)[:, None]
    pooled = (x * m).sum(axis=1) / counts
    h_pre = pooled @ params.W1.T + params.b1
    h = np.tanh(h_pre)
    logits = h @ params.W2.T + params.b2
    if counter is not None:
        counter.add(ids.shape[0])
    return ForwardTrace(ids, mask, x, pooled, h_pre, h, logits, _softmax(logits))


def forward(params: ClassifierParams, ids, delta=None, counter: QueryCounter | None = None) -> ForwardTrace:
    """Single-sentence forward pass; ``delta`` is an (n, dim) perturbation."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("ids must be a non-empty 1-D sequence")
    if delta is not None:
        delta = np.asarray(delta, dtype=np.float64)
        if delta.shape != (ids.size, params.dim):
            raise ValueError(f"delta shape {delta.shape} != {(ids.size, params.dim)}")
        delta = delta[None]
    t = forward_batch(params, ids[None], delta, counter)
    return ForwardTrace(*(getattr(t, f)[0] for f in ForwardTrace.__dataclass_fields__))


def loss_ce(trace: ForwardTrace, label) -> float | np.ndarray:
    """-log p[label], floored at 1e-12. Per-example array for batched traces."""
    if trace.batched:
        labels = np.asarray(label)
        p = trace.probs[np.arange(len(labels)), labels]
        return -np.log(np.maximum(p, PROB_FLOOR))
    return float(-np.log(max(trace.probs[label], PROB_FLOOR)))


def backward_batch(params: ClassifierParams, trace: ForwardTrace, labels) -> Gradients:
    """Gradients of the summed batch cross-entropy.

    Parameter gradients are summed over the batch; ``input_grad`` is
    (B, L, dim) with zero rows at pad positions.
    """
    labels = np.asarray(labels, dtype=np.int64)
    B = len(labels)
    rows = np.arange(B)
    dlogits = trace.probs.copy()
    dlogits[rows, labels] -= 1.0
    # below the floor the loss is constant
    dlogits[trace.probs[rows, labels] < PROB_FLOOR] = 0.0

    dW2 = dlogits.T @ trace.hidden_post
    db2 = dlogits.sum(axis=0)
    dh_pre = (dlogits @ params.W2) * (1.0 - trace.hidden_post**2)
    dW1 = dh_pre.T @ trace.pooled
    db1 = dh_pre.sum(axis=0)
    dpooled = dh_pre @ params.W1

    counts = np.maximum(trace.mask.sum(axis=1), 1)
    input_grad = trace.mask[..., None] * (dpooled / counts[:, None])[:, None, :]
    dembed = np.zeros_like(params.embed)
    np.add.at(dembed, trace.ids[trace.mask], input_grad[trace.mask])
    return Gradients({"embed": dembed, "W1": dW1, "b1": db1, "W2": dW2, "b2": db2}, input_grad)


def backward(params: ClassifierParams, trace: ForwardTrace, label) -> Gradients:
    if trace.batched:
        return backward_batch(params, trace, label)
    batched = ForwardTrace(*(getattr(trace, f)[None] for f in ForwardTrace.__dataclass_fields__))
    g = backward_batch(params, batched, [label])
    return Gradients(g.param_grads, g.input_grad[0])


def predict(params: ClassifierParams, ids, counter: QueryCounter | None = None) -> int:
    """Argmax class; ties go to the lowest class id."""
    return int(np.argmax(forward(params, ids, counter=counter).logits))


def predict_batch(params: ClassifierParams, ids, counter: QueryCounter | None = None) -> np.ndarray:
    return np.argmax(forward_batch(params, ids, counter=counter).logits, axis=1)


def sgd_step(params: ClassifierParams, grads, lr: float, weight_decay: float = 0.0) -> ClassifierParams:
    """p <- p - lr * (grad + weight_decay * p) for every tensor; returns new params."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    g = grads.param_grads if isinstance(grads, Gradients) else grads
    new = {name: p - lr * (g[name] + weight_decay * p) for name, p in params.tensors().items()}
    return ClassifierParams(**new, pad_id=params.pad_id)


def save_checkpoint(params: ClassifierParams, path, seed: int, meta: dict | None = None) -> str:
    """Write a self-describing binary checkpoint and return its id."""
    tensors = []
    offset = 0
    for name, arr in params.tensors().items():
        nbytes = arr.size * 8
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "<f8", "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {"seed": int(seed), "pad_id": int(params.pad_id), "tensors": tensors, "meta": meta or {}}
    blob = _MAGIC + json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
    blob += b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.tensors().values())
    with open(path, "wb") as fh:
        fh.write(blob)
    return checkpoint_id(blob)


def checkpoint_id(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()[:16]


def load_checkpoint(path) -> tuple[ClassifierParams, dict]:
    """Return (params, header); header carries seed, meta and the checkpoint id."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    nl = blob.index(b"\n", len(_MAGIC))
    header = json.loads(blob[len(_MAGIC):nl])
    body = blob[nl + 1:]
    arrays = {}
    for t in header["tensors"]:
        chunk = body[t["offset"]: t["offset"] + t["nbytes"]]
        arrays[t["name"]] = np.frombuffer(chunk, dtype=t["dtype"]).reshape(t["shape"]).astype(np.float64)
    header["id"] = checkpoint_id(blob)
    return ClassifierParams(**arrays, pad_id=header["pad_id"]), header
