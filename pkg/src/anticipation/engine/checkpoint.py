"""Checkpoint persistence.

A checkpoint directory holds a JSON manifest (config, dims, epoch,
validation metric, parameter catalog) plus one float64 feature file per
parameter and one for the semantic matrix.  Float64 payloads round-trip
bit-exactly, so forward outputs before save and after load agree to the
last bit in double precision.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..data.storage import read_feature_file, read_json, write_feature_file, write_json
from ..numcore import Rng
from ..semantics import SemanticMatrix
from .model import AnticipationModel
from .training import TrainConfig, TrainResult


class CheckpointError(ValueError):
    pass


def save_checkpoint(out_dir, result: TrainResult) -> Path:
    out = Path(out_dir)
    (out / "params").mkdir(parents=True, exist_ok=True)
    model = result.model
    catalog = []
    for i, (name, p) in enumerate(model.parameters().items()):
        rel = f"params/p{i:04d}.vstg"
        write_feature_file(
            out / rel, np.asarray(p.data, dtype=np.float64).reshape(1, -1)
        )
        catalog.append({"name": name, "file": rel, "shape": list(p.shape)})
    write_feature_file(
        out / "semantic.vstg", np.asarray(model.matrix.table.data, dtype=np.float64)
    )
    write_json(
        out / "manifest.json",
        {
            "config": result.config.to_dict(),
            "epoch": result.best_epoch,
            "val_top5_1s": result.best_val_top5,
            "d_v": model.d_v,
            "s_ant": model.s_ant,
            "class_names": model.matrix.class_names,
            "params": catalog,
        },
    )
    return out


def load_checkpoint(ckpt_dir) -> tuple[AnticipationModel, TrainConfig, dict]:
    root = Path(ckpt_dir)
    manifest = read_json(root / "manifest.json")
    cfg = TrainConfig.from_dict(manifest["config"])
    matrix = SemanticMatrix(
        read_feature_file(root / "semantic.vstg"), manifest["class_names"]
    )
    model = AnticipationModel(
        matrix,
        cfg.semantic,
        cfg.fusion,
        cfg.encoder,
        d_v=int(manifest["d_v"]),
        s_ant=int(manifest["s_ant"]),
        rng=Rng(cfg.seed),
    )
    params = model.parameters()
    stored = {rec["name"] for rec in manifest["params"]}
    if stored != set(params):
        raise CheckpointError(
            f"parameter catalog mismatch: only-stored={sorted(stored - set(params))} "
            f"only-model={sorted(set(params) - stored)}"
        )
    for rec in manifest["params"]:
        arr = read_feature_file(root / rec["file"]).reshape(rec["shape"])
        p = params[rec["name"]]
        if list(p.shape) != list(rec["shape"]):
            raise CheckpointError(
                f"shape mismatch for {rec['name']}: stored {rec['shape']}, "
                f"model {list(p.shape)}"
            )
        p.data = np.ascontiguousarray(arr, dtype=np.float64)
    return model, cfg, manifest
