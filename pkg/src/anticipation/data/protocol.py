"""Timing contract between observation windows and anticipation horizons.

A stored sample always carries ``s_enc + s_ant`` feature steps ending
where the target action starts.  Anticipating at step ``n`` means the
model sees the earliest ``s_enc + s_ant - n`` of them and predicts the
action that begins ``n * alpha_s`` seconds after the visible window ends:
a longer horizon implies a shorter observation.
"""

from __future__ import annotations

from dataclasses import dataclass


class ProtocolError(ValueError):
    """Anticipation step outside the configured range."""


@dataclass(frozen=True)
class AnticipationProtocol:
    s_enc: int = 6
    s_ant: int = 8
    alpha_s: float = 0.25

    def __post_init__(self):
        if self.s_enc < 1 or self.s_ant < 1:
            raise ProtocolError(
                f"s_enc and s_ant must be >= 1, got {self.s_enc}, {self.s_ant}"
            )
        if self.alpha_s <= 0:
            raise ProtocolError(f"alpha_s must be positive, got {self.alpha_s}")

    @property
    def total_steps(self) -> int:
        return self.s_enc + self.s_ant

    def _check(self, n: int) -> None:
        if not 1 <= n <= self.s_ant:
            raise ProtocolError(
                f"anticipation step {n} outside [1, {self.s_ant}]"
            )

    def observed_steps(self, n: int) -> int:
        """Number of visible feature steps when anticipating at step `n`."""
        self._check(n)
        return self.s_enc + self.s_ant - n

    def anticipation_time(self, n: int) -> float:
        """Seconds between end of observation and target start at step `n`."""
        self._check(n)
        return n * self.alpha_s

    def horizons(self) -> list[int]:
        return list(range(1, self.s_ant + 1))

    def to_dict(self) -> dict:
        return {"s_enc": self.s_enc, "s_ant": self.s_ant, "alpha_s": self.alpha_s}

    @classmethod
    def from_dict(cls, d: dict) -> "AnticipationProtocol":
        return cls(
            s_enc=int(d.get("s_enc", 6)),
            s_ant=int(d.get("s_ant", 8)),
            alpha_s=float(d.get("alpha_s", 0.25)),
        )
