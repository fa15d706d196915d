"""Iterative anticipation decoder.

The encoder summary seeds the hidden state of a gated recurrent cell,
which is applied exactly as many times as the anticipation step, feeding
the last fused token as input at every iteration (the anticipation span
itself has no observable features to feed).  A linear classifier on the
final hidden state scores the target action.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data.protocol import ProtocolError
from .layers import Linear
from .numcore import Rng, Tensor, gru_cell


@dataclass
class GruCellParams:
    """Gate parameters; hidden size matches the encoder output dimension."""

    wz: Tensor
    uz: Tensor
    bz: Tensor
    wr: Tensor
    ur: Tensor
    br: Tensor
    wh: Tensor
    uh: Tensor
    bh: Tensor
    steps_taken: int = field(default=0, compare=False)

    @classmethod
    def init(cls, rng: Rng, d_in: int, d_hidden: int) -> "GruCellParams":
        def w(tag, rows, cols):
            scale = np.sqrt(2.0 / (rows + cols))
            return Tensor(rng.child(tag).normal((rows, cols), scale), requires_grad=True)

        def b(_tag):
            return Tensor(np.zeros(d_hidden), requires_grad=True)

        return cls(
            wz=w("wz", d_in, d_hidden), uz=w("uz", d_hidden, d_hidden), bz=b("bz"),
            wr=w("wr", d_in, d_hidden), ur=w("ur", d_hidden, d_hidden), br=b("br"),
            wh=w("wh", d_in, d_hidden), uh=w("uh", d_hidden, d_hidden), bh=b("bh"),
        )

    @classmethod
    def zeros(cls, d_in: int, d_hidden: int) -> "GruCellParams":
        def w(rows, cols):
            return Tensor(np.zeros((rows, cols)), requires_grad=True)

        def b():
            return Tensor(np.zeros(d_hidden), requires_grad=True)

        return cls(
            wz=w(d_in, d_hidden), uz=w(d_hidden, d_hidden), bz=b(),
            wr=w(d_in, d_hidden), ur=w(d_hidden, d_hidden), br=b(),
            wh=w(d_in, d_hidden), uh=w(d_hidden, d_hidden), bh=b(),
        )

    @property
    def d_in(self) -> int:
        return self.wz.shape[0]

    @property
    def d_hidden(self) -> int:
        return self.wz.shape[1]

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        """One gated update:

        z = sigma(x Wz + h Uz + bz)
        r = sigma(x Wr + h Ur + br)
        hbar = tanh(x Wh + (r * h) Uh + bh)
        h' = (1 - z) * h + z * hbar
        """
        self.steps_taken += 1
        return gru_cell(
            x, h,
            self.wz, self.uz, self.bz,
            self.wr, self.ur, self.br,
            self.wh, self.uh, self.bh,
        )

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.{name}": getattr(self, name)
            for name in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")
        }


@dataclass
class ClassifierParams:
    head: Linear

    @classmethod
    def init(cls, rng: Rng, d_hidden: int, n_classes: int) -> "ClassifierParams":
        return cls(head=Linear.init(rng.child("head"), d_hidden, n_classes))

    def __call__(self, h: Tensor) -> Tensor:
        return self.head(h)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return self.head.params(f"{prefix}.head")


@dataclass
class AnticipationResult:
    hidden: Tensor  # (B, d_hidden) after the last iteration
    scores: Tensor  # (B, N)
    steps_run: int


def anticipate(
    cell: GruCellParams,
    classifier: ClassifierParams,
    h_summary: Tensor,
    x_last: Tensor,
    n: int,
    s_ant: int = 8,
) -> AnticipationResult:
    """Iterate the cell exactly `n` times from the encoder summary.

    `x_last` (the final fused token) is the input at every iteration.
    The returned step counter always equals `n`.
    """
    if not 1 <= n <= s_ant:
        raise ProtocolError(f"anticipation step {n} outside [1, {s_ant}]")
    h = h_summary
    for _ in range(n):
        h = cell.step(x_last, h)
    return AnticipationResult(hidden=h, scores=classifier(h), steps_run=n)
