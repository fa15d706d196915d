"""Small trainable building blocks shared across model modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import Rng, Tensor


@dataclass
class Linear:
    """Affine map x @ w + b with Glorot-normal weight init and zero bias."""

    w: Tensor
    b: Tensor

    @classmethod
    def init(cls, rng: Rng, d_in: int, d_out: int) -> "Linear":
        scale = np.sqrt(2.0 / (d_in + d_out))
        return cls(
            w=Tensor(rng.normal((d_in, d_out), scale), requires_grad=True),
            b=Tensor(np.zeros(d_out), requires_grad=True),
        )

    @classmethod
    def identity(cls, d: int) -> "Linear":
        return cls(
            w=Tensor(np.eye(d), requires_grad=True),
            b=Tensor(np.zeros(d), requires_grad=True),
        )

    @property
    def d_in(self) -> int:
        return self.w.shape[0]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}
