"""SGD-with-momentum training loop with validation-based epoch selection.

Each batch example draws an anticipation step (uniformly by default);
examples sharing a step form one forward/backward group, truncated to
that step's observation length.  After every epoch the top-5 accuracy at
the one-second horizon on the validation split decides whether the epoch
becomes the returned checkpoint.  Training is deterministic given the
config seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..data.dataset import Dataset, assemble_batch
from ..data.protocol import AnticipationProtocol
from ..encoder import EncoderConfig
from ..fusion import FusionConfig
from ..numcore import Rng
from ..objective import LossConfig, top5_accuracy
from ..semantics import SemanticConfig, SemanticMatrix
from .model import AnticipationModel

logger = logging.getLogger(__name__)

HORIZON_POLICIES = ("uniform", "all")


class TrainConfigError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, parts: dict):
        self.epoch = epoch
        self.batch = batch
        self.parts = parts
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}: {parts}"
        )


@dataclass
class TrainConfig:
    dataset: str | None = None
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    horizon_policy: str = "uniform"
    loss: LossConfig = field(default_factory=LossConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)

    def __post_init__(self):
        if self.lr < 0:
            raise TrainConfigError(f"lr must be >= 0, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise TrainConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1 or self.epochs < 1:
            raise TrainConfigError("batch_size and epochs must be >= 1")
        if self.horizon_policy not in HORIZON_POLICIES:
            raise TrainConfigError(
                f"horizon_policy must be one of {HORIZON_POLICIES}"
            )
        estimated = self.semantic.estimated
        if self.loss.mode == "es" and not estimated:
            raise TrainConfigError(
                f"es loss requires an estimated-semantic variant, "
                f"got {self.semantic.variant!r}"
            )
        if self.loss.mode == "gts" and estimated:
            raise TrainConfigError(
                "estimated-semantic variants train with the es loss"
            )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "lr": self.lr,
            "momentum": self.momentum,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "horizon_policy": self.horizon_policy,
            "loss": self.loss.to_dict(),
            "fusion": self.fusion.to_dict(),
            "encoder": self.encoder.to_dict(),
            "semantic": self.semantic.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise TrainConfigError(f"unknown train config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in d.items() if k in known}
        if "semantic" in kwargs:
            kwargs["semantic"] = SemanticConfig.from_dict(kwargs["semantic"])
        if "loss" in kwargs:
            kwargs["loss"] = LossConfig.from_dict(kwargs["loss"])
        elif "semantic" in kwargs:
            # default the loss mode to match the semantic variant
            mode = "es" if kwargs["semantic"].estimated else "gts"
            kwargs["loss"] = LossConfig(mode=mode)
        if "fusion" in kwargs:
            kwargs["fusion"] = FusionConfig.from_dict(kwargs["fusion"])
        if "encoder" in kwargs:
            kwargs["encoder"] = EncoderConfig.from_dict(kwargs["encoder"])
        return cls(**kwargs)

    @classmethod
    def for_variant(cls, variant: str, **kwargs) -> "TrainConfig":
        """Convenience: consistent loss mode for a semantic variant."""
        sem = SemanticConfig(variant=variant)
        mode = "es" if sem.estimated else "gts"
        loss = kwargs.pop("loss", LossConfig(mode=mode))
        return cls(semantic=sem, loss=loss, **kwargs)


def horizon_near_one_second(protocol: AnticipationProtocol) -> int:
    """Anticipation step whose horizon is closest to one second."""
    return min(
        protocol.horizons(),
        key=lambda n: (abs(protocol.anticipation_time(n) - 1.0), n),
    )


@dataclass
class TrainResult:
    model: AnticipationModel
    config: TrainConfig
    best_epoch: int
    best_val_top5: float
    history: list[dict]
    dataset: Dataset


def _needs_obs_labels(cfg: TrainConfig) -> bool:
    return cfg.semantic.variant == "gts"


def split_scores(
    model: AnticipationModel,
    samples,
    n: int,
    protocol: AnticipationProtocol,
    batch_size: int = 256,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Score a whole split at one horizon; returns (scores, obs, targets).

    Observed-action labels ride along because ground-truth-semantic
    models consume them as an oracle input; other variants ignore them.
    """
    chunks_scores, chunks_obs, chunks_tgt = [], [], []
    for start in range(0, len(samples), batch_size):
        part = samples[start : start + batch_size]
        feats, obs, tgt = assemble_batch(part, n, protocol)
        chunks_scores.append(model.scores(feats, obs, n))
        chunks_obs.append(obs)
        chunks_tgt.append(tgt)
    return (
        np.concatenate(chunks_scores),
        np.concatenate(chunks_obs),
        np.concatenate(chunks_tgt),
    )


def _snapshot(params: dict) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params: dict, snapshot: dict[str, np.ndarray]) -> None:
    for name, p in params.items():
        p.data = snapshot[name].copy()


def train(cfg: TrainConfig, dataset: Dataset | None = None) -> TrainResult:
    """Run the full loop and return the best-validation-epoch model."""
    ds = dataset if dataset is not None else Dataset.load(cfg.dataset)
    protocol = ds.protocol
    matrix = SemanticMatrix(ds.semantic, ds.classes.names)
    rng = Rng(cfg.seed)
    model = AnticipationModel(
        matrix,
        cfg.semantic,
        cfg.fusion,
        cfg.encoder,
        d_v=ds.visual_dim,
        s_ant=protocol.s_ant,
        rng=rng.child("init"),
    )
    shuffle_rng = rng.child("shuffle")
    horizon_rng = rng.child("horizons")
    drop_rng = rng.child("dropout") if cfg.encoder.dropout > 0 else None

    train_samples = ds.split("train")
    val_samples = ds.split("val")
    n_1s = horizon_near_one_second(protocol)
    params = model.parameters()
    velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    best_epoch, best_top5, best_params = -1, -np.inf, None
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(len(train_samples))
        epoch_loss = 0.0
        n_batches = 0
        for batch_no, start in enumerate(range(0, len(perm), cfg.batch_size)):
            batch = [train_samples[i] for i in perm[start : start + cfg.batch_size]]
            if cfg.horizon_policy == "uniform":
                ns = horizon_rng.integers(1, protocol.s_ant + 1, size=len(batch))
                groups = [
                    (n, np.flatnonzero(ns == n), float((ns == n).sum()) / len(batch))
                    for n in protocol.horizons()
                    if (ns == n).any()
                ]
            else:
                every = np.arange(len(batch))
                w = 1.0 / protocol.s_ant
                groups = [(n, every, w) for n in protocol.horizons()]

            for p in params.values():
                p.zero_grad()
            batch_loss = 0.0
            for n, idxs, weight in groups:
                subset = [batch[i] for i in idxs]
                feats, obs, tgt = assemble_batch(subset, n, protocol)
                loss, scalars, _ = model.loss(
                    feats, obs, tgt, n, cfg.loss, drop_rng
                )
                if not np.isfinite(scalars["total"]):
                    raise TrainingDiverged(epoch, batch_no, scalars)
                loss.backward(np.array(weight))
                batch_loss += weight * scalars["total"]

            for name, p in params.items():
                g = p.grad
                if g is None:
                    continue
                v = velocity[name]
                v *= cfg.momentum
                v += g
                p.data -= cfg.lr * v
            epoch_loss += batch_loss
            n_batches += 1

        scores, _, targets = split_scores(model, val_samples, n_1s, protocol)
        val_top5 = top5_accuracy(scores, targets)
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / max(n_batches, 1),
                "val_top5_1s": val_top5,
            }
        )
        logger.info(
            "epoch %d: loss %.4f val top5@1s %.4f", epoch,
            history[-1]["train_loss"], val_top5,
        )
        if val_top5 > best_top5:
            best_top5 = val_top5
            best_epoch = epoch
            best_params = _snapshot(params)

    _restore(params, best_params)
    return TrainResult(
        model=model,
        config=cfg,
        best_epoch=best_epoch,
        best_val_top5=float(best_top5),
        history=history,
        dataset=ds,
    )
