"""Pure-numpy implementations of the hot numeric kernels.

These are the reference semantics for the compiled extension: the Cython
module `_ckernels` implements the same signatures over C-contiguous
float64 arrays.  Everything here is row-oriented: softmax and layernorm
act on the last axis of 2D inputs, the GRU kernels on one batch step.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def softmax_fwd(x: np.ndarray) -> np.ndarray:
    """Row softmax of a 2D array, stabilized by max subtraction."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    inner = (dy * y).sum(axis=1, keepdims=True)
    return y * (dy - inner)


def layernorm_fwd(x, gain, bias, eps):
    """Normalize rows to zero mean / unit variance, then scale and shift.

    Returns (y, xhat, inv_std); the latter two are the backward cache.
    """
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gain + bias, xhat, inv_std[:, 0]


def layernorm_bwd(xhat, inv_std, gain, dy):
    d = xhat.shape[1]
    dxhat = dy * gain
    mean_dxhat = dxhat.mean(axis=1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = inv_std[:, None] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    return dx, dgain, dbias


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gru_fwd(x, h, wz, uz, bz, wr, ur, br, wh, uh, bh):
    """One gated recurrent step for a batch.

    z = sigma(x Wz + h Uz + bz)
    r = sigma(x Wr + h Ur + br)
    hbar = tanh(x Wh + (r * h) Uh + bh)
    h' = (1 - z) * h + z * hbar

    Returns (h_new, z, r, hbar); the gate values are the backward cache.
    """
    z = _sigmoid(x @ wz + h @ uz + bz)
    r = _sigmoid(x @ wr + h @ ur + br)
    hbar = np.tanh(x @ wh + (r * h) @ uh + bh)
    h_new = (1.0 - z) * h + z * hbar
    return h_new, z, r, hbar


def gru_bwd(x, h, z, r, hbar, wz, uz, wr, ur, wh, uh, dh_new):
    """Gradients of one GRU step w.r.t. inputs and all nine parameters."""
    dz = dh_new * (hbar - h)
    da_z = dz * z * (1.0 - z)
    dhbar = dh_new * z
    da_h = dhbar * (1.0 - hbar * hbar)
    dh = dh_new * (1.0 - z)

    dhr = da_h @ uh.T
    dr = dhr * h
    da_r = dr * r * (1.0 - r)
    dh = dh + dhr * r + da_z @ uz.T + da_r @ ur.T
    dx = da_z @ wz.T + da_r @ wr.T + da_h @ wh.T

    hr = r * h
    grads = (
        dx,
        dh,
        x.T @ da_z,
        h.T @ da_z,
        da_z.sum(axis=0),
        x.T @ da_r,
        h.T @ da_r,
        da_r.sum(axis=0),
        x.T @ da_h,
        hr.T @ da_h,
        da_h.sum(axis=0),
    )
    return grads
