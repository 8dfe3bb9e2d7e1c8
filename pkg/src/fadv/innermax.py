"""Inner maximisation over input-embedding perturbations.

Single-sentence functions take an (n, dim) gradient and return an (n, dim)
perturbation. The ``*_batch`` variants work on (B, L, dim) arrays and
normalise each sentence's matrix separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fadv import model as M

GRAD_EPS = 1e-12
# l2 norms within this relative slack of epsilon count as inside the ball,
# so a projected point (norm eps +- 1 ulp) is left unchanged: exact idempotence
PROJ_SLACK = 1e-12
NORMS = ("l2", "linf")
METHODS = ("fgsm", "fgm", "pgd", "ascent")


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float = 1.0
    alpha: float = 0.1
    steps: int = 1
    norm: str = "l2"
    project: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")


def fgsm(input_grad, epsilon: float) -> np.ndarray:
    return epsilon * np.sign(np.asarray(input_grad, dtype=np.float64))


def fgm(input_grad, epsilon: float) -> np.ndarray:
    g = np.asarray(input_grad, dtype=np.float64)
    norm = np.linalg.norm(g)
    if norm < GRAD_EPS:
        return np.zeros_like(g)
    return epsilon * g / norm


def project(delta, epsilon: float, norm: str = "l2") -> np.ndarray:
    """Project onto the epsilon-ball of ``norm`` (whole-matrix norm for l2)."""
    delta = np.asarray(delta, dtype=np.float64)
    if norm == "linf":
        return np.clip(delta, -epsilon, epsilon)
    n = np.linalg.norm(delta)
    if n > epsilon * (1 + PROJ_SLACK):
        return delta * (epsilon / n)
    return delta.copy()


def pgd_step(delta_prev, input_grad, cfg: PerturbationConfig) -> np.ndarray:
    g = np.asarray(input_grad, dtype=np.float64)
    gnorm = np.linalg.norm(g)
    if gnorm < GRAD_EPS:
        return np.array(delta_prev, dtype=np.float64)
    candidate = delta_prev + cfg.alpha * g / gnorm
    if cfg.project:
        candidate = project(candidate, cfg.epsilon, cfg.norm)
    return candidate


@dataclass
class AscentResult:
    delta: np.ndarray
    losses: list = field(default_factory=list)
    aborted: bool = False


def multi_step_ascent(params, ids, label, cfg: PerturbationConfig, counter=None) -> AscentResult:
    """K normalised ascent steps from delta=0; PGD-K when ``cfg.project``.

    ``losses[k]`` is the loss at the k-th iterate (losses[0] is the clean loss).
    """
    ids = np.asarray(ids, dtype=np.int64)
    delta = np.zeros((ids.size, params.dim))
    losses = []
    for _ in range(cfg.steps):
        trace = M.forward(params, ids, delta, counter)
        loss = M.loss_ce(trace, label)
        if not np.isfinite(loss):
            return AscentResult(delta, losses, aborted=True)
        losses.append(loss)
        g = M.backward(params, trace, label).input_grad
        nxt = pgd_step(delta, g, cfg)
        if not np.all(np.isfinite(nxt)):
            return AscentResult(delta, losses, aborted=True)
        delta = nxt
    final = M.loss_ce(M.forward(params, ids, delta, counter), label)
    if np.isfinite(final):
        losses.append(final)
    return AscentResult(delta, losses)


# -- batched ---------------------------------------------------------------

def _per_sentence_norm(x):
    return np.sqrt((x * x).sum(axis=(1, 2)))[:, None, None]


def project_batch(delta, epsilon, norm="l2"):
    if norm == "linf":
        return np.clip(delta, -epsilon, epsilon)
    n = _per_sentence_norm(delta)
    scale = np.where(n > epsilon * (1 + PROJ_SLACK), epsilon / np.maximum(n, GRAD_EPS), 1.0)
    return delta * scale


def normalized_batch(g):
    n = _per_sentence_norm(g)
    return np.where(n < GRAD_EPS, 0.0, g / np.maximum(n, GRAD_EPS))


def perturb_batch(params, ids, labels, method: str, cfg: PerturbationConfig) -> np.ndarray:
    """Adversarial (B, L, dim) perturbation of the looked-up embeddings.

    fgsm / fgm take one gradient at the clean input; pgd runs ``cfg.steps``
    projected steps; ascent runs ``cfg.steps`` unprojected steps. Non-finite
    iterates keep the sentence's previous perturbation. ``epsilon == 0``
    disables the perturbation for every method.
    """
    if method not in METHODS:
        raise ValueError(f"unknown inner method {method!r}")
    ids = np.asarray(ids)
    delta = np.zeros(ids.shape + (params.dim,))
    if cfg.epsilon == 0:
        return delta
    if method in ("fgsm", "fgm"):
        trace = M.forward_batch(params, ids)
        g = M.backward_batch(params, trace, labels).input_grad
        if method == "fgsm":
            return cfg.epsilon * np.sign(g)
        return cfg.epsilon * normalized_batch(g)
    for _ in range(cfg.steps):
        trace = M.forward_batch(params, ids, delta)
        g = M.backward_batch(params, trace, labels).input_grad
        nxt = delta + cfg.alpha * normalized_batch(g)
        if method == "pgd":
            nxt = project_batch(nxt, cfg.epsilon, cfg.norm)
        ok = np.all(np.isfinite(nxt), axis=(1, 2))
        delta = np.where(ok[:, None, None], nxt, delta)
    return delta
