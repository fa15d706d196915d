"""Benchmark the compiled kernel backend against the numpy fallback.

Times the three dispatched kernels (GRU step, layernorm, softmax,
forward and backward) at desk-scale shapes, plus one full model
train-step as an end-to-end proxy.  Run via `anticipation bench`.
"""

from __future__ import annotations

import time

import numpy as np

from .encoder import EncoderConfig
from .engine.model import AnticipationModel
from .fusion import FusionConfig
from .numcore import Rng
from .numcore import kernels
from .objective import LossConfig
from .semantics import SemanticConfig, SemanticMatrix


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def _kernel_cases(rng: Rng, batch: int, d: int):
    x = rng.normal((batch, d))
    h = rng.normal((batch, d))
    weights = [rng.normal((d, d)) for _ in range(6)]
    biases = [rng.normal((d,)) for _ in range(3)]
    gru_args = (
        x, h,
        weights[0], weights[1], biases[0],
        weights[2], weights[3], biases[1],
        weights[4], weights[5], biases[2],
    )
    h_new, z, r, hbar = kernels.gru_fwd(*gru_args)
    dh = rng.normal((batch, d))
    gain, bias = rng.normal((d,)), rng.normal((d,))
    _, xhat, istd = kernels.layernorm_fwd(x, gain, bias, 1e-5)
    y = kernels.softmax_fwd(x)

    return {
        "gru_fwd": lambda: kernels.gru_fwd(*gru_args),
        "gru_bwd": lambda: kernels.gru_bwd(
            x, h, z, r, hbar,
            weights[0], weights[1], weights[2], weights[3], weights[4], weights[5],
            dh,
        ),
        "layernorm_fwd": lambda: kernels.layernorm_fwd(x, gain, bias, 1e-5),
        "layernorm_bwd": lambda: kernels.layernorm_bwd(xhat, istd, gain, dh),
        "softmax_fwd": lambda: kernels.softmax_fwd(x),
        "softmax_bwd": lambda: kernels.softmax_bwd(y, dh),
    }


def _train_step_case(rng: Rng, batch: int = 32, d_v: int = 32, d_s: int = 16,
                     n_classes: int = 10, t_obs: int = 10):
    matrix = SemanticMatrix(
        rng.normal((n_classes, d_s)), [f"c{i}" for i in range(n_classes)]
    )
    model = AnticipationModel(
        matrix,
        SemanticConfig(variant="fw"),
        FusionConfig(strategy="weighted_sum"),
        EncoderConfig(),
        d_v=d_v,
        s_ant=8,
        rng=rng.child("model"),
    )
    feats = rng.normal((batch, t_obs, d_v))
    obs = rng.integers(0, n_classes, size=batch)
    tgt = rng.integers(0, n_classes, size=batch)
    loss_cfg = LossConfig(mode="es")

    def step():
        for p in model.parameters().values():
            p.zero_grad()
        loss, _, _ = model.loss(feats, obs, tgt, 4, loss_cfg)
        loss.backward()

    return step


def run_benchmark(repeats: int = 200, batch: int = 32, dim: int = 32) -> dict:
    backends = kernels.available_backends()
    rows: dict[str, dict[str, float]] = {}
    original = kernels.active_backend()
    try:
        for backend in backends:
            kernels.use_backend(backend)
            rng = Rng(1234)
            cases = _kernel_cases(rng, batch, dim)
            cases["model_train_step"] = _train_step_case(rng.child("model-step"))
            for name, fn in cases.items():
                reps = max(repeats // 20, 3) if name == "model_train_step" else repeats
                rows.setdefault(name, {})[backend] = _time(fn, reps)
    finally:
        kernels.use_backend(original)
    return {
        "batch": batch,
        "dim": dim,
        "repeats": repeats,
        "backends": backends,
        "seconds_per_call": rows,
    }


def render_benchmark(result: dict) -> str:
    backends = result["backends"]
    name_w = max(len(n) for n in result["seconds_per_call"])
    header = f"{'kernel':<{name_w}}" + "".join(f"  {b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    lines = [
        f"kernel timings (batch={result['batch']}, dim={result['dim']}, "
        f"seconds/call)",
        header,
        "-" * len(header),
    ]
    for name, times in result["seconds_per_call"].items():
        row = f"{name:<{name_w}}"
        for b in backends:
            row += f"  {times[b]:>12.3e}"
        if len(backends) == 2 and "compiled" in times and "python" in times:
            row += f"  {times['python'] / times['compiled']:>7.2f}x"
        lines.append(row)
    return "\n".join(lines)
