"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled lane: stride-1 im2col/col2im for the
convolutions, overlapping max-pool with argmax routing, and the full
LSTM sequence recurrence (the caller precomputes the input projection,
so only the hidden-to-hidden matmul lives in the time loop).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

NAME = "numpy"


def im2col(xp: np.ndarray, kernel: int) -> np.ndarray:
    """[B, Lp, C] -> [B, Lp-kernel+1, kernel*C] patch matrix."""
    b, lp, c = xp.shape
    win = sliding_window_view(xp, kernel, axis=1)  # [B, Lo, C, K]
    return np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(b, lp - kernel + 1, kernel * c)


def col2im(dcols: np.ndarray, kernel: int, lp: int) -> np.ndarray:
    """Scatter-add patch gradients back to the padded input layout."""
    b, lo, kc = dcols.shape
    c = kc // kernel
    dcr = dcols.reshape(b, lo, kernel, c)
    dxp = np.zeros((b, lp, c))
    for k in range(kernel):
        dxp[:, k : k + lo] += dcr[:, :, k]
    return dxp


def maxpool_forward(x: np.ndarray, size: int, stride: int):
    """Per-window max along the time axis; returns values and absolute
    source indices (first occurrence on ties)."""
    win = sliding_window_view(x, size, axis=1)[:, ::stride]  # [B, P, C, size]
    out = win.max(axis=-1)
    rel = win.argmax(axis=-1)
    p = out.shape[1]
    idx = rel + (np.arange(p) * stride)[None, :, None]
    return out, idx.astype(np.int64)


def maxpool_backward(dout: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    b, p, c = dout.shape
    dx = np.zeros((b, length, c))
    bi = np.arange(b)[:, None, None]
    ci = np.arange(c)[None, None, :]
    np.add.at(dx, (bi, idx, ci), dout)
    return dx


def lstm_forward(xp: np.ndarray, wh: np.ndarray):
    """Run the gate recurrence over a projected input sequence.

    xp is the precomputed input projection [B, T, 4H] (gate order i,f,g,o);
    wh is the hidden-to-hidden matrix [H, 4H]. Initial state is zero.
    Returns (h, c, gates, tanh_c), each [B, T, ...], with gates stored
    post-activation for the backward pass.
    """
    b, t_len, four_h = xp.shape
    h_dim = four_h // 4
    h = np.empty((b, t_len, h_dim))
    c = np.empty((b, t_len, h_dim))
    gates = np.empty((b, t_len, four_h))
    tanh_c = np.empty((b, t_len, h_dim))

    h_prev = np.zeros((b, h_dim))
    c_prev = np.zeros((b, h_dim))
    for t in range(t_len):
        a = xp[:, t] + h_prev @ wh
        i = expit(a[:, :h_dim])
        f = expit(a[:, h_dim : 2 * h_dim])
        g = np.tanh(a[:, 2 * h_dim : 3 * h_dim])
        o = expit(a[:, 3 * h_dim :])
        c_t = f * c_prev + i * g
        tc = np.tanh(c_t)
        h_t = o * tc
        gates[:, t, :h_dim] = i
        gates[:, t, h_dim : 2 * h_dim] = f
        gates[:, t, 2 * h_dim : 3 * h_dim] = g
        gates[:, t, 3 * h_dim :] = o
        c[:, t] = c_t
        tanh_c[:, t] = tc
        h[:, t] = h_t
        h_prev, c_prev = h_t, c_t
    return h, c, gates, tanh_c


def lstm_backward(dh_out: np.ndarray, h, c, gates, tanh_c, wh):
    """Backpropagate through the gate recurrence.

    dh_out carries the gradient w.r.t. every hidden output [B, T, H].
    Returns (dxp, dwh); the caller turns dxp into input/weight gradients.
    """
    b, t_len, h_dim = dh_out.shape
    dxp = np.empty((b, t_len, 4 * h_dim))
    dwh = np.zeros_like(wh)
    dh_next = np.zeros((b, h_dim))
    dc_next = np.zeros((b, h_dim))
    for t in range(t_len - 1, -1, -1):
        i = gates[:, t, :h_dim]
        f = gates[:, t, h_dim : 2 * h_dim]
        g = gates[:, t, 2 * h_dim : 3 * h_dim]
        o = gates[:, t, 3 * h_dim :]
        tc = tanh_c[:, t]
        dh = dh_out[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        c_prev = c[:, t - 1] if t > 0 else 0.0
        da = dxp[:, t]
        da[:, :h_dim] = dc * g * i * (1.0 - i)
        da[:, h_dim : 2 * h_dim] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * h_dim : 3 * h_dim] = dc * i * (1.0 - g * g)
        da[:, 3 * h_dim :] = dh * tc * o * (1.0 - o)
        if t > 0:
            dwh += h[:, t - 1].T @ da
        dh_next = da @ wh.T
        dc_next = dc * f
    return dxp, dwh
