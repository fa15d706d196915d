"""Visual-semantic fusion strategies.

The semantic vector is a single feature per sample while the visual side
is a sequence, so every strategy decides how to spread one vector across
time: concatenate it onto every step, mix it into every step with
learnable scalar weights, run both through a per-step MLP, or attend from
the semantic query over the visual sequence and append the result as one
extra token.

Shapes: semantics (B, d_s), visual sequences (B, T, d_v).  The fused
dimension depends only on strategy and projection direction and is
available before parameter construction via :func:`fused_dim`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .layers import Linear
from .numcore import Rng, Tensor, concat, softmax

STRATEGIES = ("concat", "weighted_sum", "mlp", "attention")
PROJECTIONS = ("semantic", "visual")


class FusionConfigError(ValueError):
    pass


@dataclass
class FusionConfig:
    strategy: str = "weighted_sum"
    projection: str = "semantic"  # honored by weighted_sum; attention always
    # projects the semantic query to the visual dimension
    mlp_hidden: int | None = None  # mlp strategy; defaults to d_v

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise FusionConfigError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if self.projection not in PROJECTIONS:
            raise FusionConfigError(
                f"projection must be one of {PROJECTIONS}, got {self.projection!r}"
            )

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "projection": self.projection,
            "mlp_hidden": self.mlp_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        return cls(
            strategy=d.get("strategy", "weighted_sum"),
            projection=d.get("projection", "semantic"),
            mlp_hidden=d.get("mlp_hidden"),
        )


def fused_dim(cfg: FusionConfig, d_v: int, d_s: int) -> int:
    """Output feature dimension of the fused sequence."""
    if cfg.strategy == "concat":
        return d_v + d_s
    if cfg.strategy == "weighted_sum":
        return d_v if cfg.projection == "semantic" else d_s
    return d_v  # mlp and attention both emit visual-sized features


@dataclass
class FusionParams:
    cfg: FusionConfig
    proj: Linear | None = None  # weighted_sum dimension bridge
    w_vis: Tensor | None = None
    w_sem: Tensor | None = None
    mlp_in: Linear | None = None
    mlp_out: Linear | None = None
    attn_query: Linear | None = None  # d_s -> d_v
    attn_out: Linear | None = None  # (d_v + d_s) -> d_v
    _extra: dict = field(default_factory=dict)

    @classmethod
    def init(cls, cfg: FusionConfig, d_v: int, d_s: int, rng: Rng) -> "FusionParams":
        p = cls(cfg=cfg)
        if cfg.strategy == "weighted_sum":
            if cfg.projection == "semantic":
                p.proj = Linear.init(rng.child("proj"), d_s, d_v)
            else:
                p.proj = Linear.init(rng.child("proj"), d_v, d_s)
            p.w_vis = Tensor(np.array(1.0), requires_grad=True)
            p.w_sem = Tensor(np.array(1.0), requires_grad=True)
        elif cfg.strategy == "mlp":
            hidden = cfg.mlp_hidden or d_v
            p.mlp_in = Linear.init(rng.child("mlp_in"), d_v + d_s, hidden)
            p.mlp_out = Linear.init(rng.child("mlp_out"), hidden, d_v)
        elif cfg.strategy == "attention":
            p.attn_query = Linear.init(rng.child("attn_query"), d_s, d_v)
            p.attn_out = Linear.init(rng.child("attn_out"), d_v + d_s, d_v)
        return p

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if self.proj is not None:
            out.update(self.proj.params(f"{prefix}.proj"))
        if self.w_vis is not None:
            out[f"{prefix}.w_vis"] = self.w_vis
            out[f"{prefix}.w_sem"] = self.w_sem
        if self.mlp_in is not None:
            out.update(self.mlp_in.params(f"{prefix}.mlp_in"))
            out.update(self.mlp_out.params(f"{prefix}.mlp_out"))
        if self.attn_query is not None:
            out.update(self.attn_query.params(f"{prefix}.attn_query"))
            out.update(self.attn_out.params(f"{prefix}.attn_out"))
        return out


def project(x: Tensor, mapping: Linear) -> Tensor:
    """Bridge one modality to the other's dimension with a trainable map."""
    return mapping(x)


def _spread(s: Tensor, t: int) -> Tensor:
    """Broadcast one semantic vector per sample across t time steps."""
    b, d_s = s.shape
    return s.reshape(b, 1, d_s).broadcast_to((b, t, d_s))


def fuse_concat(s: Tensor, feats: Tensor) -> Tensor:
    """Append the semantic vector to every visual step on the feature axis."""
    return concat([feats, _spread(s, feats.shape[1])], axis=-1)


def fuse_weighted_sum(s: Tensor, feats: Tensor, p: FusionParams) -> Tensor:
    """Per-step mix w_vis * visual + w_sem * semantic (after projection).

    With weights (1, 0) this is exactly the visual sequence, which is how
    a semantic-free ablation runs inside the fused architecture.
    """
    b = s.shape[0]
    if p.cfg.projection == "semantic":
        sp = project(s, p.proj)  # (B, d_v)
        return p.w_vis * feats + p.w_sem * sp.reshape(b, 1, sp.shape[1])
    fp = project(feats, p.proj)  # (B, T, d_s)
    return p.w_vis * fp + p.w_sem * s.reshape(b, 1, s.shape[1])


def fuse_mlp(s: Tensor, feats: Tensor, p: FusionParams) -> Tensor:
    """Two-layer perceptron over [visual step, semantic] per time step."""
    stacked = concat([feats, _spread(s, feats.shape[1])], axis=-1)
    return p.mlp_out(p.mlp_in(stacked).relu())


def fuse_attention(
    s: Tensor, feats: Tensor, p: FusionParams, return_weights: bool = False
):
    """Semantic query attends over the visual sequence; the attended
    vector is combined with the semantic feature and appended as one
    extra token after the visual sequence."""
    b, t, d_v = feats.shape
    q = project(s, p.attn_query).reshape(b, 1, d_v)
    scores = (q @ feats.transpose((0, 2, 1))) * (1.0 / math.sqrt(d_v))
    weights = softmax(scores, axis=-1)  # (B, 1, T)
    attended = (weights @ feats).reshape(b, d_v)
    fused = p.attn_out(concat([attended, s], axis=-1))
    out = concat([feats, fused.reshape(b, 1, d_v)], axis=1)
    if return_weights:
        return out, weights.data.reshape(b, t)
    return out


def fuse(s: Tensor, feats: Tensor, p: FusionParams) -> Tensor:
    if p.cfg.strategy == "concat":
        return fuse_concat(s, feats)
    if p.cfg.strategy == "weighted_sum":
        return fuse_weighted_sum(s, feats, p)
    if p.cfg.strategy == "mlp":
        return fuse_mlp(s, feats, p)
    return fuse_attention(s, feats, p)
