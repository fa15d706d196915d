"""Synthetic action-grammar benchmark generator.

Each class gets a visual prototype (unit Gaussian in d_v dims) and a
semantic prototype (separate d_s-dim space).  A sample draws an observed
class c, emits ``s_enc + s_ant`` noisy copies of c's visual prototype,
and draws the target class from a transition rule mixed toward uniform:

    P(t | c) = informativeness * rule(t | c) + (1 - informativeness) / N

so informativeness 1 makes the target a deterministic function of c
(successor rule) and 0 makes it independent.  The same knob controls how
much class identity the semantic matrix carries: rows interpolate between
per-class prototypes and one shared vector.

Everything downstream of generation works on the float32 values exactly
as they are stored, so a directory is byte-reproducible from its seed and
the recorded oracle ceiling matches what a reader of the files computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..numcore.rng import Rng
from .dataset import DEFAULT_MODALITY, Dataset
from .protocol import AnticipationProtocol
from .storage import write_feature_file, write_index, write_json


class ConfigError(ValueError):
    pass


def _default_transition() -> dict:
    return {"kind": "successor", "offset": 1}


def _default_samples() -> dict:
    return {"train": 2000, "val": 500, "test": 500}


@dataclass
class SynthConfig:
    n_classes: int
    d_v: int = 32
    d_s: int = 16
    noise_sigma: float = 0.1
    informativeness: float = 1.0
    transition: dict = field(default_factory=_default_transition)
    samples: dict = field(default_factory=_default_samples)
    seed: int = 0
    n_verbs: int | None = None

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.d_v < 1 or self.d_s < 1:
            raise ConfigError("d_v and d_s must be positive")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.informativeness <= 1.0:
            raise ConfigError(
                f"informativeness must lie in [0, 1], got {self.informativeness}"
            )
        if any(int(v) < 0 for v in self.samples.values()):
            raise ConfigError("split sizes must be >= 0")
        kind = self.transition.get("kind")
        if kind not in ("successor", "markov"):
            raise ConfigError(f"unknown transition kind {kind!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {
            "n_classes", "d_v", "d_s", "noise_sigma", "informativeness",
            "transition", "samples", "seed", "n_verbs",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "d_v": self.d_v,
            "d_s": self.d_s,
            "noise_sigma": self.noise_sigma,
            "informativeness": self.informativeness,
            "transition": self.transition,
            "samples": {k: int(v) for k, v in self.samples.items()},
            "seed": self.seed,
            "n_verbs": self.n_verbs,
        }


def rule_matrix(cfg: SynthConfig) -> np.ndarray:
    """Row-stochastic transition rule before mixing toward uniform."""
    n = cfg.n_classes
    if cfg.transition["kind"] == "successor":
        offset = int(cfg.transition.get("offset", 1))
        mat = np.zeros((n, n))
        mat[np.arange(n), (np.arange(n) + offset) % n] = 1.0
        return mat
    mat = np.asarray(cfg.transition["matrix"], dtype=np.float64)
    if mat.shape != (n, n):
        raise ConfigError(f"markov matrix must be {n}x{n}, got {mat.shape}")
    if (mat < 0).any() or not np.allclose(mat.sum(axis=1), 1.0, atol=1e-9):
        raise ConfigError("markov matrix rows must be nonnegative and sum to 1")
    return mat


def mixed_transition(cfg: SynthConfig) -> np.ndarray:
    lam = cfg.informativeness
    n = cfg.n_classes
    return lam * rule_matrix(cfg) + (1.0 - lam) / n


def _class_records(cfg: SynthConfig) -> list[dict]:
    n_verbs = cfg.n_verbs or math.ceil(math.sqrt(cfg.n_classes))
    return [
        {
            "id": c,
            "name": f"v{c % n_verbs}_n{c // n_verbs}",
            "verb_id": c % n_verbs,
            "noun_id": c // n_verbs,
        }
        for c in range(cfg.n_classes)
    ]


def _oracle_top1(
    feats_by_sample: list[np.ndarray],
    targets: np.ndarray,
    prototypes: np.ndarray,
    transition: np.ndarray,
    t_obs: int,
) -> float:
    """Accuracy of: nearest-prototype observed class, then most likely
    transition.  Exhaustive over classes; this is the dataset's reference
    ceiling for learned models."""
    if not feats_by_sample:
        return float("nan")
    hits = 0
    for feats, target in zip(feats_by_sample, targets):
        mean = feats[:t_obs].astype(np.float64).mean(axis=0)
        dist = ((prototypes - mean) ** 2).sum(axis=1)
        c_hat = int(np.argmin(dist))
        t_hat = int(np.argmax(transition[c_hat]))
        hits += int(t_hat == int(target))
    return hits / len(feats_by_sample)


def generate(cfg: SynthConfig, out_dir) -> Dataset:
    """Write a dataset directory and load it back.

    Deterministic: identical config (including seed) produces byte
    identical directory contents.
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    protocol = AnticipationProtocol()
    root_rng = Rng(cfg.seed)

    prototypes = (
        root_rng.child("visual-prototypes")
        .normal((cfg.n_classes, cfg.d_v))
        .astype(np.float32)
    )
    sem_rng = root_rng.child("semantic-prototypes")
    sem_protos = sem_rng.normal((cfg.n_classes, cfg.d_s))
    sem_common = sem_rng.normal((cfg.d_s,))
    lam = cfg.informativeness
    semantic = (lam * sem_protos + (1.0 - lam) * sem_common).astype(np.float32)

    transition = mixed_transition(cfg)
    cumulative = np.cumsum(transition, axis=1)

    write_feature_file(out / "semantic.vstg", semantic)
    write_feature_file(out / "prototypes.vstg", prototypes)
    write_json(out / "classes.json", _class_records(cfg))

    class_records = _class_records(cfg)
    target_start = protocol.total_steps * protocol.alpha_s
    oracle_inputs: dict[str, tuple[list[np.ndarray], list[int]]] = {}

    for split, count in cfg.samples.items():
        rng = root_rng.child(f"split-{split}")
        records = []
        feats_list: list[np.ndarray] = []
        targets: list[int] = []
        for i in range(int(count)):
            c = int(rng.integers(0, cfg.n_classes))
            u = float(rng.uniform(()))
            t = int(np.searchsorted(cumulative[c], u, side="right"))
            t = min(t, cfg.n_classes - 1)
            noise = rng.normal((protocol.total_steps, cfg.d_v), cfg.noise_sigma)
            feats = (prototypes[c].astype(np.float64) + noise).astype(np.float32)
            segment = f"{split}_{i:05d}"
            rel = f"features/{segment}.vstg"
            write_feature_file(out / rel, feats)
            records.append(
                {
                    "segment_id": segment,
                    "features": {DEFAULT_MODALITY: rel},
                    "obs_label": c,
                    "target_label": t,
                    "verb_id": class_records[t]["verb_id"],
                    "noun_id": class_records[t]["noun_id"],
                    "target_start_s": target_start,
                }
            )
            feats_list.append(feats)
            targets.append(t)
        write_index(out / f"{split}.jsonl", records)
        oracle_inputs[split] = (feats_list, targets)

    # Reference ceiling at the horizon closest to 1 s (the epoch-selection
    # metric's horizon).
    n_star = min(
        protocol.horizons(), key=lambda n: abs(protocol.anticipation_time(n) - 1.0)
    )
    t_obs = protocol.observed_steps(n_star)
    ceilings = {
        split: _oracle_top1(
            feats, np.asarray(tgts), prototypes.astype(np.float64), transition, t_obs
        )
        for split, (feats, tgts) in oracle_inputs.items()
    }

    write_json(
        out / "meta.json",
        {
            "kind": "synthetic-action-grammar",
            "config": cfg.to_dict(),
            "protocol": protocol.to_dict(),
            "bayes_top1": ceilings,
            "bayes_horizon_step": n_star,
        },
    )
    return Dataset.load(out)
