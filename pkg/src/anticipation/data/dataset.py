"""Sample containers, dataset loading and batch assembly.

A stored sample carries the full ``s_enc + s_ant`` feature steps; horizon
truncation happens at batch assembly, which keeps the earliest
``observed_steps(n)`` steps so the visible window always ends ``n`` steps
before the target action starts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .protocol import AnticipationProtocol, ProtocolError
from .storage import read_feature_file, read_index, read_json

logger = logging.getLogger(__name__)

DEFAULT_MODALITY = "rgb"


@dataclass
class FeatureSequence:
    steps: np.ndarray  # (T, d_v)
    segment_id: str
    target_start_s: float

    def __post_init__(self):
        self.steps = np.asarray(self.steps)
        if self.steps.ndim != 2:
            raise ValueError(f"feature sequence must be 2D, got {self.steps.shape}")

    @property
    def length(self) -> int:
        return self.steps.shape[0]

    @property
    def dim(self) -> int:
        return self.steps.shape[1]


@dataclass
class Sample:
    features: dict[str, FeatureSequence]
    obs_label: int
    target_label: int
    verb_id: int | None = None
    noun_id: int | None = None

    @property
    def segment_id(self) -> str:
        return next(iter(self.features.values())).segment_id


@dataclass
class ClassInfo:
    names: list[str]
    verb_ids: list[int] | None = None
    noun_ids: list[int] | None = None

    def __len__(self):
        return len(self.names)

    @property
    def has_verb_noun(self) -> bool:
        return self.verb_ids is not None and self.noun_ids is not None

    @classmethod
    def from_records(cls, records: list[dict]) -> "ClassInfo":
        records = sorted(records, key=lambda r: r["id"])
        names = [r["name"] for r in records]
        if all("verb_id" in r and "noun_id" in r for r in records):
            return cls(
                names,
                [int(r["verb_id"]) for r in records],
                [int(r["noun_id"]) for r in records],
            )
        return cls(names)


@dataclass
class Dataset:
    protocol: AnticipationProtocol
    classes: ClassInfo
    semantic: np.ndarray  # (N, d_s) float64
    splits: dict[str, list[Sample]]
    meta: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def visual_dim(self) -> int:
        first = next(s for split in self.splits.values() for s in split)
        return first.features[DEFAULT_MODALITY].dim

    @property
    def semantic_dim(self) -> int:
        return self.semantic.shape[1]

    def split(self, name: str) -> list[Sample]:
        if name not in self.splits:
            raise KeyError(f"unknown split {name!r}; have {sorted(self.splits)}")
        return self.splits[name]

    @classmethod
    def load(cls, root) -> "Dataset":
        """Load a dataset directory produced by the synthetic generator or
        an external ingest that follows the same layout.

        Samples whose stored sequences do not span the protocol's full
        ``s_enc + s_ant`` steps are rejected at indexing time; the count
        is logged.
        """
        root = Path(root)
        meta = read_json(root / "meta.json")
        protocol = AnticipationProtocol.from_dict(meta.get("protocol", {}))
        classes = ClassInfo.from_records(read_json(root / "classes.json"))
        semantic = read_feature_file(root / "semantic.vstg").astype(np.float64)
        if semantic.shape[0] != len(classes):
            raise ValueError(
                f"semantic matrix has {semantic.shape[0]} rows but "
                f"{len(classes)} classes are indexed"
            )

        splits: dict[str, list[Sample]] = {}
        rejected = 0
        for index_path in sorted(root.glob("*.jsonl")):
            name = index_path.stem
            samples: list[Sample] = []
            for rec in read_index(index_path):
                feats = {}
                for modality, rel in rec["features"].items():
                    feats[modality] = FeatureSequence(
                        steps=read_feature_file(root / rel),
                        segment_id=rec["segment_id"],
                        target_start_s=float(rec["target_start_s"]),
                    )
                lengths = {f.length for f in feats.values()}
                if lengths != {protocol.total_steps}:
                    rejected += 1
                    continue
                samples.append(
                    Sample(
                        features=feats,
                        obs_label=int(rec["obs_label"]),
                        target_label=int(rec["target_label"]),
                        verb_id=rec.get("verb_id"),
                        noun_id=rec.get("noun_id"),
                    )
                )
            splits[name] = samples
        if rejected:
            logger.warning(
                "rejected %d samples shorter than %d steps",
                rejected,
                protocol.total_steps,
            )
        ds = cls(protocol, classes, semantic, splits, meta)
        ds.meta["rejected_samples"] = rejected
        return ds


def assemble_batch(
    samples: list[Sample],
    n: int,
    protocol: AnticipationProtocol,
    modality: str = DEFAULT_MODALITY,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack samples into (features, obs_labels, target_labels) for step `n`.

    Features come out as float64 of shape (B, observed_steps(n), d_v): the
    earliest steps of each stored sequence, so the window ends n steps
    before the target.
    """
    if not samples:
        raise ProtocolError("cannot assemble an empty batch")
    t_obs = protocol.observed_steps(n)
    feats = np.stack(
        [s.features[modality].steps[:t_obs].astype(np.float64) for s in samples]
    )
    obs = np.array([s.obs_label for s in samples], dtype=np.int64)
    tgt = np.array([s.target_label for s in samples], dtype=np.int64)
    return feats, obs, tgt
