"""Configuration grids: train one model per cell, tabulate top-5 @ 1 s.

Grid cells are named override dicts applied onto a base train config.
A failing cell records its error and the grid continues.
"""

from __future__ import annotations

import logging
from typing import Any

from ..data.dataset import Dataset
from .evaluation import evaluate
from .training import TrainConfig, horizon_near_one_second, train

logger = logging.getLogger(__name__)


def deep_merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def run_grid(
    base: dict, cells: list[dict], dataset: Dataset | None = None
) -> dict[str, Any]:
    """`base` is a TrainConfig dict; each cell is {"name", "overrides"}."""
    results = []
    for cell in cells:
        name = cell.get("name", "unnamed")
        entry: dict[str, Any] = {"name": name}
        try:
            cfg = TrainConfig.from_dict(deep_merge(base, cell.get("overrides", {})))
            result = train(cfg, dataset)
            n_1s = horizon_near_one_second(result.dataset.protocol)
            entry["val_top5_1s"] = result.best_val_top5
            entry["best_epoch"] = result.best_epoch
            if "test" in result.dataset.splits and result.dataset.split("test"):
                report = evaluate(result.model, result.dataset, "test")
                entry["test_top5_1s"] = report.top5_at(n_1s)
        except Exception as exc:  # cell failures never stop the grid
            logger.exception("grid cell %s failed", name)
            entry["error"] = f"{type(exc).__name__}: {exc}"
        results.append(entry)
    return {"cells": results}


def render_table(grid_result: dict) -> str:
    rows = grid_result["cells"]
    name_w = max([len(r["name"]) for r in rows] + [len("configuration")])
    lines = [
        f"{'configuration':<{name_w}}  {'val top5@1s':>11}  {'test top5@1s':>12}",
        "-" * (name_w + 27),
    ]
    for r in rows:
        if "error" in r:
            lines.append(f"{r['name']:<{name_w}}  FAILED: {r['error']}")
        else:
            test = r.get("test_top5_1s")
            test_s = f"{test:.4f}" if test is not None else "-"
            lines.append(
                f"{r['name']:<{name_w}}  {r['val_top5_1s']:>11.4f}  {test_s:>12}"
            )
    return "\n".join(lines)
