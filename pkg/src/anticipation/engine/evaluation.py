"""Multi-horizon evaluation.

Every anticipation step gets its own decode (n GRU iterations on the
matching observation length) and a top-5 accuracy entry.  At the horizon
closest to one second the report adds verb/noun/action top-5 accuracy
and mean top-5 recall; verb and noun scores come from marginalizing
action scores (max over actions sharing the verb or noun), so no extra
heads are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data.dataset import ClassInfo, Dataset
from ..objective import mean_top5_recall, top5_accuracy
from .model import AnticipationModel
from .training import horizon_near_one_second, split_scores


@dataclass
class EvalReport:
    split: str
    horizons: list[dict]
    at_1s: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "horizons": self.horizons,
            "at_1s": self.at_1s,
        }

    def top5_at(self, n: int) -> float:
        for row in self.horizons:
            if row["step"] == n:
                return row["top5_accuracy"]
        raise KeyError(f"no horizon entry for step {n}")


def marginalize_scores(
    action_scores: np.ndarray, group_ids: list[int]
) -> np.ndarray:
    """Score per group = max over member actions' scores."""
    ids = np.asarray(group_ids, dtype=np.int64)
    n_groups = int(ids.max()) + 1
    out = np.full((action_scores.shape[0], n_groups), -np.inf)
    for g in range(n_groups):
        members = np.flatnonzero(ids == g)
        if members.size:
            out[:, g] = action_scores[:, members].max(axis=1)
    return out


def _verb_noun_metrics(
    scores: np.ndarray, targets: np.ndarray, classes: ClassInfo
) -> dict:
    out = {}
    for kind, ids in (("verb", classes.verb_ids), ("noun", classes.noun_ids)):
        grouped = marginalize_scores(scores, ids)
        labels = np.asarray(ids, dtype=np.int64)[targets]
        out[kind] = {
            "top5_accuracy": top5_accuracy(grouped, labels),
            "mean_top5_recall": mean_top5_recall(grouped, labels),
        }
    return out


def evaluate(
    model: AnticipationModel,
    dataset: Dataset,
    split: str = "test",
    batch_size: int = 256,
) -> EvalReport:
    protocol = dataset.protocol
    samples = dataset.split(split)
    n_1s = horizon_near_one_second(protocol)
    horizons = []
    at_1s: dict = {}
    for n in protocol.horizons():
        scores, _, targets = split_scores(
            model, samples, n, protocol, batch_size
        )
        horizons.append(
            {
                "step": n,
                "anticipation_s": protocol.anticipation_time(n),
                "top5_accuracy": top5_accuracy(scores, targets),
            }
        )
        if n == n_1s:
            at_1s = {
                "action": {
                    "top5_accuracy": top5_accuracy(scores, targets),
                    "mean_top5_recall": mean_top5_recall(scores, targets),
                }
            }
            if dataset.classes.has_verb_noun:
                at_1s.update(
                    _verb_noun_metrics(scores, targets, dataset.classes)
                )
    return EvalReport(split=split, horizons=horizons, at_1s=at_1s)
