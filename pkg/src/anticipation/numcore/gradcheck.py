"""Central-difference verification of reverse-mode gradients.

`grad_check` evaluates a scalar-valued function twice per parameter entry
(at +h and -h) and compares the finite-difference slope against the tape
gradient.  Central differences halve the truncation error relative to
forward differences, which is what makes the 1e-4 relative tolerance
attainable in double precision with h = 1e-5.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


class GradCheckError(RuntimeError):
    """Raised when a non-finite value is encountered during checking."""


@dataclass
class GradCheckReport:
    tol: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    def __str__(self):
        lines = [f"grad_check tol={self.tol:g} max={self.max_error:.3e}"]
        for name, err in sorted(self.errors.items()):
            lines.append(f"  {name}: {err:.3e}")
        return "\n".join(lines)


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    # Below the floor the comparison becomes absolute: central differences
    # carry ~1e-11 of roundoff noise (eps * |f| / h), so entries whose true
    # gradient is tiny or exactly zero must not divide by that noise.
    diff = np.abs(a - b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float((diff / scale).max()) if diff.size else 0.0


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    tol: float = 1e-4,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare tape gradients of `f()` against central differences.

    `f` must rebuild its graph on every call (it is re-evaluated at
    perturbed parameter values).  `params` maps names to the leaf tensors
    to check; every leaf must have ``requires_grad`` set.
    """
    for name, p in params.items():
        if not p.requires_grad:
            raise ValueError(f"parameter {name!r} does not require gradients")
        p.zero_grad()

    out = f()
    if out.size != 1:
        raise ValueError(f"grad_check target must be scalar, got {out.shape}")
    if not np.isfinite(out.data).all():
        raise GradCheckError("non-finite function value at the base point")
    out.backward()

    analytic = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.isfinite(g).all():
            raise GradCheckError(f"non-finite reverse-mode gradient for {name!r}")
        analytic[name] = g.copy()

    report = GradCheckReport(tol=tol)
    for name, p in params.items():
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f().item()
            flat[i] = orig - h
            lo = f().item()
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise GradCheckError(
                    f"non-finite value while perturbing {name!r} entry {i}"
                )
            num_flat[i] = (hi - lo) / (2.0 * h)
        report.errors[name] = _relative_error(analytic[name], numeric)
    return report
