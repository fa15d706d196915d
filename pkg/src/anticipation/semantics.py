"""Semantic feature generation.

One semantic vector per sample describes the observed action's class.
The ground-truth variant looks the class embedding up directly; the
estimated variants derive it from the visual observation: a linear
classifier on the mean-pooled sequence yields class scores, which either
weight the whole embedding table (variant ``fw``), weight its top-k rows
(``pw``), index its best row (``nei``), or are bypassed entirely by a
regression MLP (``mlp``).

All batched operations take sequences of shape (B, T, d_v) and return
semantics of shape (B, d_s).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.protocol import ProtocolError
from .layers import Linear
from .numcore import Rng, Tensor, softmax, take_rows

VARIANTS = ("none", "gts", "fw", "pw", "nei", "mlp")
ESTIMATED_VARIANTS = ("fw", "pw", "nei", "mlp")

DEFAULT_TOP_K = 500


class SemanticConfigError(ValueError):
    pass


@dataclass
class SemanticConfig:
    variant: str = "gts"
    top_k: int | None = None  # pw only; resolved against N at build
    mlp_hidden: int | None = None  # mlp only; defaults to 2 * d_s

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SemanticConfigError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if self.top_k is not None and self.top_k < 1:
            raise SemanticConfigError(f"top_k must be >= 1, got {self.top_k}")

    @property
    def estimated(self) -> bool:
        return self.variant in ESTIMATED_VARIANTS

    def resolve_top_k(self, n_classes: int) -> int:
        """Default: the standard 500, capped at N for small class sets."""
        if self.top_k is None:
            return DEFAULT_TOP_K if n_classes >= DEFAULT_TOP_K else n_classes
        if self.top_k > n_classes:
            raise SemanticConfigError(
                f"top_k {self.top_k} exceeds class count {n_classes}"
            )
        return self.top_k

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "top_k": self.top_k,
            "mlp_hidden": self.mlp_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SemanticConfig":
        return cls(
            variant=d.get("variant", "gts"),
            top_k=d.get("top_k"),
            mlp_hidden=d.get("mlp_hidden"),
        )


class SemanticMatrix:
    """Per-class embedding table, fixed input to the model (never trained)."""

    def __init__(self, table, class_names: list[str]):
        arr = np.asarray(table, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError(f"semantic matrix must be (N>=2, d_s), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("semantic matrix contains non-finite entries")
        if len(class_names) != arr.shape[0]:
            raise ValueError(
                f"{len(class_names)} class names for {arr.shape[0]} matrix rows"
            )
        self.table = Tensor(arr)
        self.class_names = list(class_names)

    @property
    def n_classes(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]


def lookup_semantic(matrix: SemanticMatrix, labels) -> Tensor:
    """Ground-truth semantics: row `labels[i]` of the table per sample."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= matrix.n_classes):
        raise IndexError(
            f"label outside [0, {matrix.n_classes}): "
            f"{labels[(labels < 0) | (labels >= matrix.n_classes)][0]}"
        )
    return take_rows(matrix.table, labels)


def classify_observation(clf: Linear, feats: Tensor) -> tuple[Tensor, Tensor]:
    """Class scores for the observed window: linear on the time-mean.

    Returns (logits, probabilities), both (B, N).
    """
    if feats.ndim != 3 or feats.shape[1] == 0:
        raise ProtocolError(
            f"observation classifier needs a nonempty (B, T, d_v) sequence, "
            f"got {feats.shape}"
        )
    pooled = feats.mean(axis=1)
    logits = clf(pooled)
    return logits, softmax(logits, axis=-1)


def mixture_semantic(probs: Tensor, matrix: SemanticMatrix) -> Tensor:
    """Probability-weighted mixture of all class embeddings (variant fw)."""
    return probs @ matrix.table


def topk_semantic(logits: Tensor, matrix: SemanticMatrix, top_k: int) -> Tensor:
    """Mixture restricted to each row's top_k scores (variant pw).

    Scores outside the top_k get exactly zero weight; the kept scores are
    re-normalized by a softmax over just that subset.  Ties at the k-th
    score keep the lowest class id.
    """
    n = matrix.n_classes
    if not 1 <= top_k <= n:
        raise SemanticConfigError(f"top_k must lie in [1, {n}], got {top_k}")
    order = np.argsort(-logits.data, axis=1, kind="stable")
    mask = np.ones_like(logits.data, dtype=bool)
    rows = np.arange(logits.shape[0])[:, None]
    mask[rows, order[:, :top_k]] = False
    weights = softmax(logits.masked_fill(mask, -np.inf), axis=-1)
    return weights @ matrix.table


def argmax_semantic(logits: Tensor, matrix: SemanticMatrix) -> Tensor:
    """Embedding row of the single best score (variant nei).

    Index selection is not differentiable; the result is detached, so no
    gradient reaches the classifier through this path.  Ties keep the
    lowest class id.
    """
    idx = np.argmax(logits.data, axis=1)
    return Tensor(matrix.table.data[idx])


@dataclass
class SemanticMlp:
    """Regresses the semantic vector from pooled visual features (variant mlp)."""

    hidden: Linear
    out: Linear

    @classmethod
    def init(cls, rng: Rng, d_v: int, d_s: int, width: int | None = None):
        width = width or 2 * d_s
        return cls(hidden=Linear.init(rng, d_v, width), out=Linear.init(rng, width, d_s))

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {
            **self.hidden.params(f"{prefix}.hidden"),
            **self.out.params(f"{prefix}.out"),
        }


def mlp_semantic(mlp: SemanticMlp, feats: Tensor) -> Tensor:
    if feats.ndim != 3 or feats.shape[1] == 0:
        raise ProtocolError(
            f"semantic mlp needs a nonempty (B, T, d_v) sequence, got {feats.shape}"
        )
    pooled = feats.mean(axis=1)
    return mlp.out(mlp.hidden(pooled).relu())
