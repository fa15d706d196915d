"""Sequence encoder: sinusoidal positions, self-attention blocks, pooling.

The default block order is Post-Norm (sublayer, residual add, then
layernorm); a Pre-Norm variant with a learnable positional table exists
as a config flag for architecture ablations.  The encoder preserves the
input feature dimension, and the pooled summary either averages all
output tokens or reads a learned class token prepended to the sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layers import Linear
from .numcore import Rng, Tensor, concat, layernorm, softmax

POOLING = ("mean", "class_token")
NORM_STYLES = ("post", "pre")
POSITIONAL = ("fixed", "learned")


class EncoderConfigError(ValueError):
    pass


@dataclass
class EncoderConfig:
    m_blocks: int = 1
    n_heads: int = 4
    ffn_hidden: int | None = None  # defaults to 4 * d_model
    pooling: str = "mean"
    dropout: float = 0.0
    norm_style: str = "post"
    positional: str = "fixed"
    max_len: int = 32  # learned positional table size

    def __post_init__(self):
        if self.m_blocks < 1:
            raise EncoderConfigError(f"m_blocks must be >= 1, got {self.m_blocks}")
        if self.pooling not in POOLING:
            raise EncoderConfigError(f"pooling must be one of {POOLING}")
        if self.norm_style not in NORM_STYLES:
            raise EncoderConfigError(f"norm_style must be one of {NORM_STYLES}")
        if self.positional not in POSITIONAL:
            raise EncoderConfigError(f"positional must be one of {POSITIONAL}")
        if not 0.0 <= self.dropout < 1.0:
            raise EncoderConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return {
            "m_blocks": self.m_blocks,
            "n_heads": self.n_heads,
            "ffn_hidden": self.ffn_hidden,
            "pooling": self.pooling,
            "dropout": self.dropout,
            "norm_style": self.norm_style,
            "positional": self.positional,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


def positional_encoding(t: int, d: int) -> np.ndarray:
    """Fixed sinusoidal position table of shape (t, d).

    Column 2i holds sin(pos / 10000^(2i/d)) and column 2i+1 the cosine at
    the same frequency; every entry lies in [-1, 1].
    """
    if d < 2:
        raise EncoderConfigError(f"positional encoding needs d >= 2, got {d}")
    pos = np.arange(t, dtype=np.float64)[:, None]
    pair = 2 * (np.arange(d, dtype=np.float64) // 2)
    angles = pos / np.power(10000.0, pair / d)
    table = np.empty((t, d))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


@dataclass
class BlockParams:
    wq: Linear
    wk: Linear
    wv: Linear
    wo: Linear
    ln1_g: Tensor
    ln1_b: Tensor
    ffn_in: Linear
    ffn_out: Linear
    ln2_g: Tensor
    ln2_b: Tensor

    @classmethod
    def init(cls, rng: Rng, d_model: int, ffn_hidden: int) -> "BlockParams":
        return cls(
            wq=Linear.init(rng.child("wq"), d_model, d_model),
            wk=Linear.init(rng.child("wk"), d_model, d_model),
            wv=Linear.init(rng.child("wv"), d_model, d_model),
            wo=Linear.init(rng.child("wo"), d_model, d_model),
            ln1_g=Tensor(np.ones(d_model), requires_grad=True),
            ln1_b=Tensor(np.zeros(d_model), requires_grad=True),
            ffn_in=Linear.init(rng.child("ffn_in"), d_model, ffn_hidden),
            ffn_out=Linear.init(rng.child("ffn_out"), ffn_hidden, d_model),
            ln2_g=Tensor(np.ones(d_model), requires_grad=True),
            ln2_b=Tensor(np.zeros(d_model), requires_grad=True),
        )

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for name in ("wq", "wk", "wv", "wo", "ffn_in", "ffn_out"):
            out.update(getattr(self, name).params(f"{prefix}.{name}"))
        for name in ("ln1_g", "ln1_b", "ln2_g", "ln2_b"):
            out[f"{prefix}.{name}"] = getattr(self, name)
        return out


def multi_head_attention(
    x: Tensor, p: BlockParams, n_heads: int, return_weights: bool = False
):
    """Scaled dot-product self-attention with per-head size d_model/n_heads."""
    b, t, d = x.shape
    if d % n_heads:
        raise EncoderConfigError(f"d_model {d} not divisible by {n_heads} heads")
    dh = d // n_heads

    def split(z: Tensor) -> Tensor:
        return z.reshape(b, t, n_heads, dh).transpose((0, 2, 1, 3))

    q, k, v = split(p.wq(x)), split(p.wk(x)), split(p.wv(x))
    scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    weights = softmax(scores, axis=-1)  # (B, H, T, T)
    mixed = (weights @ v).transpose((0, 2, 1, 3)).reshape(b, t, d)
    out = p.wo(mixed)
    if return_weights:
        return out, weights.data
    return out


def _feed_forward(x: Tensor, p: BlockParams) -> Tensor:
    return p.ffn_out(p.ffn_in(x).relu())


def _dropout(x: Tensor, rate: float, rng: Rng | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.uniform(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)


def transformer_block(
    x: Tensor,
    p: BlockParams,
    n_heads: int,
    norm_style: str = "post",
    dropout: float = 0.0,
    drop_rng: Rng | None = None,
) -> Tensor:
    if norm_style == "post":
        attended = _dropout(multi_head_attention(x, p, n_heads), dropout, drop_rng)
        x1 = layernorm(attended + x, p.ln1_g, p.ln1_b)
        ff = _dropout(_feed_forward(x1, p), dropout, drop_rng)
        return layernorm(ff + x1, p.ln2_g, p.ln2_b)
    normed = layernorm(x, p.ln1_g, p.ln1_b)
    x1 = x + _dropout(multi_head_attention(normed, p, n_heads), dropout, drop_rng)
    return x1 + _dropout(
        _feed_forward(layernorm(x1, p.ln2_g, p.ln2_b), p), dropout, drop_rng
    )


@dataclass
class EncoderParams:
    blocks: list[BlockParams]
    class_token: Tensor | None = None
    pos_table: Tensor | None = None  # learned positional variant

    @classmethod
    def init(cls, cfg: EncoderConfig, d_model: int, rng: Rng) -> "EncoderParams":
        if d_model % cfg.n_heads:
            raise EncoderConfigError(
                f"d_model {d_model} not divisible by n_heads {cfg.n_heads}"
            )
        hidden = cfg.ffn_hidden or 4 * d_model
        blocks = [
            BlockParams.init(rng.child(f"block{i}"), d_model, hidden)
            for i in range(cfg.m_blocks)
        ]
        token = None
        if cfg.pooling == "class_token":
            token = Tensor(
                rng.child("class_token").normal((d_model,), 0.02), requires_grad=True
            )
        pos = None
        if cfg.positional == "learned":
            pos = Tensor(
                rng.child("positions").normal((cfg.max_len, d_model), 0.02),
                requires_grad=True,
            )
        return cls(blocks=blocks, class_token=token, pos_table=pos)

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.block{i}"))
        if self.class_token is not None:
            out[f"{prefix}.class_token"] = self.class_token
        if self.pos_table is not None:
            out[f"{prefix}.positions"] = self.pos_table
        return out


def pool_tokens(tokens: Tensor, mode: str) -> Tensor:
    """Reduce encoded tokens (B, T, d) to one summary vector (B, d).

    Mean averages over time; class_token reads position 0, where the
    learned token was prepended before encoding.
    """
    if mode == "mean":
        return tokens.mean(axis=1)
    if mode == "class_token":
        return tokens[:, 0, :]
    raise EncoderConfigError(f"unknown pooling mode {mode!r}")


def encode(
    params: EncoderParams,
    cfg: EncoderConfig,
    x: Tensor,
    drop_rng: Rng | None = None,
) -> tuple[Tensor, Tensor]:
    """Run the block stack over a fused sequence (B, T, d).

    Returns (encoded tokens, pooled summary).  The class token, when
    configured, is prepended before positions are added so it owns
    position 0.
    """
    b, t, d = x.shape
    if params.class_token is not None:
        token = params.class_token.reshape(1, 1, d).broadcast_to((b, 1, d))
        x = concat([token, x], axis=1)
        t += 1
    if cfg.positional == "fixed":
        x = x + Tensor(positional_encoding(t, d))
    else:
        if t > params.pos_table.shape[0]:
            raise EncoderConfigError(
                f"sequence length {t} exceeds learned position table "
                f"{params.pos_table.shape[0]}"
            )
        x = x + params.pos_table[:t, :].reshape(1, t, d)
    for block in params.blocks:
        x = transformer_block(
            x, block, cfg.n_heads, cfg.norm_style, cfg.dropout, drop_rng
        )
    return x, pool_tokens(x, cfg.pooling)
