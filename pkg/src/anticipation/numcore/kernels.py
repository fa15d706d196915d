"""Kernel backend selection.

Two interchangeable backends provide the hot numeric kernels (softmax,
layernorm and the fused GRU step): a Cython extension `_ckernels` and the
numpy module `_pykernels`.  The compiled backend is preferred when it
imported cleanly; the environment variable ``ANTICIPATION_KERNELS`` forces
the choice (``compiled`` or ``python``).  Tensor ops always read the
active backend through this module, so tests and the benchmark can switch
at runtime with :func:`use_backend`.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


class KernelBackendError(RuntimeError):
    pass


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _default_backend() -> str:
    forced = os.environ.get("ANTICIPATION_KERNELS", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise KernelBackendError(
                f"ANTICIPATION_KERNELS={forced!r} but available backends are "
                f"{available_backends()}"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


_active = _BACKENDS[_default_backend()]


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise KernelBackendError(
            f"unknown kernel backend {name!r}; available: {available_backends()}"
        )
    _active = _BACKENDS[name]


def active_backend() -> str:
    return _active.NAME


def softmax_fwd(x):
    return _active.softmax_fwd(x)


def softmax_bwd(y, dy):
    return _active.softmax_bwd(y, dy)


def layernorm_fwd(x, gain, bias, eps):
    return _active.layernorm_fwd(x, gain, bias, eps)


def layernorm_bwd(xhat, inv_std, gain, dy):
    return _active.layernorm_bwd(xhat, inv_std, gain, dy)


def gru_fwd(x, h, wz, uz, bz, wr, ur, br, wh, uh, bh):
    return _active.gru_fwd(x, h, wz, uz, bz, wr, ur, br, wh, uh, bh)


def gru_bwd(x, h, z, r, hbar, wz, uz, wr, ur, wh, uh, dh_new):
    return _active.gru_bwd(x, h, z, r, hbar, wz, uz, wr, ur, wh, uh, dh_new)
