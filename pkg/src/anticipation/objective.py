"""Training losses and evaluation metrics.

The target and observation classification losses are label-smoothed
cross entropy on predicted probabilities.  Estimated semantics add two
alignment losses against the ground-truth embedding: cosine distance
(direction) and summed squared error (magnitude; summed over the feature
dimension, not averaged).  Metrics are top-5 accuracy and mean per-class
top-5 recall, with deterministic lowest-class-id tie handling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .numcore import ShapeError, Tensor, softmax, take_along_last, take_rows

logger = logging.getLogger(__name__)

LOSS_MODES = ("gts", "es")

DEFAULT_LOSS_WEIGHTS = (2.1, 1.0, 1.0)
TWO_STREAM_LOSS_WEIGHTS = (2.9, 1.0, 1.1)  # used with the RGB+flow setup

PROB_FLOOR = 1e-12


class LossConfigError(ValueError):
    pass


@dataclass
class LossConfig:
    mode: str = "es"
    theta: float = 0.1  # label smoothing
    a: float = DEFAULT_LOSS_WEIGHTS[0]  # observation loss weight
    b: float = DEFAULT_LOSS_WEIGHTS[1]  # cosine loss weight
    c: float = DEFAULT_LOSS_WEIGHTS[2]  # squared-error loss weight

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise LossConfigError(f"mode must be one of {LOSS_MODES}")
        if not 0.0 <= self.theta <= 1.0:
            raise LossConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if min(self.a, self.b, self.c) < 0:
            raise LossConfigError("loss weights must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "theta": self.theta,
            "a": self.a,
            "b": self.b,
            "c": self.c,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        return cls(**{k: d[k] for k in ("mode", "theta", "a", "b", "c") if k in d})


def smooth_cross_entropy(probs: Tensor, labels, theta: float) -> Tensor:
    """Label-smoothed cross entropy on probabilities (mean over the batch).

    Per sample: -(1 - theta) * log p[true] - (theta / N) * sum_i log p[i].
    Probabilities are floored at 1e-12 before the log.
    """
    if not 0.0 <= theta <= 1.0:
        raise LossConfigError(f"theta must lie in [0, 1], got {theta}")
    if probs.ndim == 1:
        probs = probs.reshape(1, probs.shape[0])
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n = probs.shape[1]
    logp = probs.clip_min(PROB_FLOOR).log()
    true_term = take_along_last(logp, labels).mean()
    smooth_term = logp.sum(axis=1).mean()
    return -(1.0 - theta) * true_term - (theta / n) * smooth_term


def cosine_distance_loss(est: Tensor, ref: Tensor) -> Tensor:
    """1 - cosine similarity, averaged over the batch; lies in [0, 2].

    Rows where either vector is zero contribute a flat 1.0 with no
    gradient (logged, since they indicate a degenerate semantic target).
    """
    if est.ndim == 1:
        est = est.reshape(1, est.shape[0])
        ref = ref.reshape(1, ref.shape[0])
    if est.shape != ref.shape:
        raise ShapeError(f"cosine loss shapes differ: {est.shape} vs {ref.shape}")
    norms_est = np.linalg.norm(est.data, axis=1)
    norms_ref = np.linalg.norm(ref.data, axis=1)
    good = (norms_est > 0) & (norms_ref > 0)
    b = est.shape[0]
    if not good.all():
        logger.warning(
            "cosine loss: %d zero-norm rows contribute constant 1", (~good).sum()
        )
    if not good.any():
        return Tensor(np.array(1.0))
    idx = np.flatnonzero(good)
    e, r = take_rows(est, idx), take_rows(ref, idx)
    dot = (e * r).sum(axis=1)
    denom = ((e * e).sum(axis=1)).sqrt() * ((r * r).sum(axis=1)).sqrt()
    per_row = 1.0 - dot / denom
    return (per_row.sum() + float((~good).sum())) * (1.0 / b)


def squared_error_loss(est: Tensor, ref: Tensor) -> Tensor:
    """Sum over the feature dimension of squared differences, batch-averaged.

    Deliberately a sum (not a mean) over features, matching the alignment
    objective this model trains with.
    """
    if est.ndim == 1:
        est = est.reshape(1, est.shape[0])
        ref = ref.reshape(1, ref.shape[0])
    if est.shape != ref.shape:
        raise ShapeError(f"squared error shapes differ: {est.shape} vs {ref.shape}")
    diff = est - ref
    return (diff * diff).sum(axis=1).mean()


def combined_loss(cfg: LossConfig, parts: dict[str, Tensor]) -> Tensor:
    """Weighted total: target + a*observation + b*cosine + c*squared.

    gts mode uses the target term alone; es mode requires all four parts.
    """
    if "target" not in parts:
        raise LossConfigError("missing loss part 'target'")
    if cfg.mode == "gts":
        return parts["target"]
    missing = {"observation", "cosine", "squared"} - set(parts)
    if missing:
        raise LossConfigError(f"es mode missing loss parts: {sorted(missing)}")
    return (
        parts["target"]
        + cfg.a * parts["observation"]
        + cfg.b * parts["cosine"]
        + cfg.c * parts["squared"]
    )


# -- metrics ------------------------------------------------------------------


def _topk_hits(scores: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Boolean per-row: true label among the k best scores.

    Stable sort on negated scores breaks ties toward the lowest class id.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise ShapeError(
            f"scores {scores.shape} incompatible with labels {labels.shape}"
        )
    k = min(k, scores.shape[1])
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return (order == labels[:, None]).any(axis=1)


def top5_accuracy(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose true label scores among the best five."""
    hits = _topk_hits(scores, labels, 5)
    if hits.size == 0:
        raise ValueError("top5_accuracy of an empty batch")
    return float(hits.mean())


def mean_top5_recall(scores: np.ndarray, labels: np.ndarray) -> float:
    """Unweighted mean over classes present in `labels` of per-class
    top-5 recall."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("mean_top5_recall of an empty batch")
    hits = _topk_hits(scores, labels, 5)
    recalls = [hits[labels == c].mean() for c in np.unique(labels)]
    return float(np.mean(recalls))


def late_fuse(scores_a, scores_b, w_a, w_b):
    """Weighted sum of two modality score matrices (arrays or tensors)."""
    if isinstance(scores_a, Tensor) or isinstance(w_a, Tensor):
        a = scores_a if isinstance(scores_a, Tensor) else Tensor(scores_a)
        b = scores_b if isinstance(scores_b, Tensor) else Tensor(scores_b)
        if a.shape != b.shape:
            raise ShapeError(f"late fusion shapes differ: {a.shape} vs {b.shape}")
        return w_a * a + w_b * b
    a = np.asarray(scores_a)
    b = np.asarray(scores_b)
    if a.shape != b.shape:
        raise ShapeError(f"late fusion shapes differ: {a.shape} vs {b.shape}")
    return float(w_a) * a + float(w_b) * b


def fit_late_fusion(
    scores_a: np.ndarray,
    scores_b: np.ndarray,
    labels: np.ndarray,
    lr: float = 0.5,
    steps: int = 200,
) -> tuple[float, float]:
    """Train the two fusion weights on held-out scores of frozen models.

    Minimizes plain cross entropy of softmax(w_a * A + w_b * B) by
    gradient descent from (1, 1).
    """
    w_a = Tensor(np.array(1.0), requires_grad=True)
    w_b = Tensor(np.array(1.0), requires_grad=True)
    a = Tensor(scores_a)
    b = Tensor(scores_b)
    for _ in range(steps):
        w_a.zero_grad()
        w_b.zero_grad()
        fused = late_fuse(a, b, w_a, w_b)
        loss = smooth_cross_entropy(softmax(fused, axis=-1), labels, theta=0.0)
        loss.backward()
        w_a.data -= lr * w_a.grad
        w_b.data -= lr * w_b.grad
    return w_a.item(), w_b.item()
