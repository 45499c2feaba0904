"""Differentiable operations: the layer set the classifier needs plus a few
structural helpers (concat, time slicing, broadcasting add).

Layer math delegates to the selected kernel backend; each op's backward is
hand-derived and covered by finite-difference checks in the test suite.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels as K
from .tensor import Tensor, as_tensor, make_node


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_node(out_data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a [..., n, m] @ b [m, p]; the right operand is always a weight matrix."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            lead = int(np.prod(a.shape[:-1], dtype=np.int64))
            db = a.data.reshape(lead, a.shape[-1]).T @ g.reshape(lead, b.shape[1])
            b.accumulate_grad(db)

    return make_node(out_data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return make_node(x.data * mask, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            x.accumulate_grad(y * (g - dot))

    return make_node(y, (x,), backward)


def concat(tensors: list, axis: int) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(index)])

    return make_node(out_data, tuple(tensors), backward)


def flip_time(x: Tensor) -> Tensor:
    """Reverse axis 1 (the time axis of a [B, T, F] tensor)."""
    x = as_tensor(x)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g[:, ::-1])

    return make_node(x.data[:, ::-1].copy(), (x,), backward)


def time_step(x: Tensor, t: int) -> Tensor:
    """Select one time step of a [B, T, F] tensor."""
    x = as_tensor(x)

    def backward(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[:, t] = g
            x.accumulate_grad(dx)

    return make_node(x.data[:, t].copy(), (x,), backward)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return make_node(x.data.reshape(shape), (x,), backward)


def same_padding(kernel: int) -> tuple[int, int]:
    """Zero-padding that preserves length at stride 1 (extra point on the
    right for even kernels)."""
    total = kernel - 1
    left = total // 2
    return left, total - left


def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """Cross-correlation over the time axis: x [B, L, Cin], w [K, Cin, Cout].

    Only stride 1 with length-preserving zero padding is supported; that is
    the only configuration the architecture uses.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if stride != 1:
        raise ShapeError(f"conv1d supports stride 1 only, got {stride}")
    if padding != "same":
        raise ShapeError(f"conv1d supports 'same' padding only, got {padding!r}")
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeError(f"conv1d expects x [B,L,C], w [K,Cin,Cout]; got {x.shape}, {w.shape}")
    kernel, c_in, c_out = w.shape
    if x.shape[2] != c_in:
        raise ShapeError(
            f"conv1d channel mismatch: input {x.shape} has {x.shape[2]} channels, "
            f"weights {w.shape} expect {c_in}"
        )
    pad_l, pad_r = same_padding(kernel)
    xp = np.pad(x.data, ((0, 0), (pad_l, pad_r), (0, 0)))
    cols = K.im2col(xp, kernel)  # [B, L, K*Cin]
    w_mat = w.data.reshape(kernel * c_in, c_out)
    out_data = cols @ w_mat + b.data

    batch, length = x.shape[0], x.shape[1]

    def backward(g):
        g2 = g.reshape(batch * length, c_out)
        if b.requires_grad:
            b.accumulate_grad(g2.sum(axis=0))
        if w.requires_grad:
            dw = cols.reshape(batch * length, kernel * c_in).T @ g2
            w.accumulate_grad(dw.reshape(kernel, c_in, c_out))
        if x.requires_grad:
            dcols = g @ w_mat.T
            dxp = K.col2im(dcols, kernel, xp.shape[1])
            x.accumulate_grad(dxp[:, pad_l : pad_l + length])

    return make_node(out_data, (x, w, b), backward)


def maxpool1d(x: Tensor, size: int = 4, stride: int = 2) -> Tensor:
    """Overlapping max pool; the gradient routes to the first maximal element
    of each window."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"maxpool1d expects [B, L, C], got {x.shape}")
    length = x.shape[1]
    if length < size:
        raise ShapeError(f"maxpool1d window {size} exceeds sequence length {length}")
    out_data, idx = K.maxpool_forward(x.data, size, stride)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(K.maxpool_backward(g, idx, length))

    return make_node(out_data, (x,), backward)


def pooled_length(length: int, size: int = 4, stride: int = 2) -> int:
    if length < size:
        raise ShapeError(f"cannot pool length {length} with window {size}")
    return (length - size) // stride + 1


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of a [B, L, C] tensor over batch and time.

    Training mode normalizes with batch statistics and updates the running
    buffers in place; inference mode uses the running buffers.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 3:
        raise ShapeError(f"batch_norm expects [B, L, C], got {x.shape}")
    n = x.shape[0] * x.shape[1]
    if training:
        if n < 2:
            raise ShapeError("batch_norm in training mode needs more than one value per channel")
        mean = x.data.mean(axis=(0, 1))
        var = x.data.var(axis=(0, 1))
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 1)))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 1)))
        if x.requires_grad:
            dxhat = g * gamma.data
            if training:
                dx = (
                    dxhat
                    - dxhat.mean(axis=(0, 1))
                    - xhat * (dxhat * xhat).mean(axis=(0, 1))
                ) * inv_std
            else:
                dx = dxhat * inv_std
            x.accumulate_grad(dx)

    return make_node(out_data, (x, gamma, beta), backward)


def lstm_seq(xp: Tensor, wh: Tensor) -> Tensor:
    """One-direction LSTM over a projected input sequence.

    xp [B, T, 4H] is x @ wx + b computed outside (one big matmul); wh is the
    recurrent matrix. Returns the hidden sequence [B, T, H].
    """
    xp, wh = as_tensor(xp), as_tensor(wh)
    if xp.shape[2] != 4 * wh.shape[0] or wh.shape[1] != 4 * wh.shape[0]:
        raise ShapeError(f"lstm_seq mismatch: xp {xp.shape}, wh {wh.shape}")
    h, c, gates, tanh_c = K.lstm_forward(xp.data, wh.data)

    def backward(g):
        dxp, dwh = K.lstm_backward(g, h, c, gates, tanh_c, wh.data)
        if xp.requires_grad:
            xp.accumulate_grad(dxp)
        if wh.requires_grad:
            wh.accumulate_grad(dwh)

    return make_node(h, (xp, wh), backward)


def mse_loss(pred: Tensor, target: np.ndarray, strict_one_hot: bool = True) -> Tensor:
    """Mean of squared differences over every element of the batch.

    The target must be one-hot rows (checked unless ``strict_one_hot`` is
    disabled for plain regression-style use in tests).
    """
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    if strict_one_hot:
        is_binary = np.isin(target, (0.0, 1.0)).all()
        if not is_binary or not np.allclose(target.sum(axis=-1), 1.0):
            raise ValueError("mse_loss target rows must be one-hot")
    diff = pred.data - target
    n = diff.size
    loss = float((diff * diff).sum() / n)

    def backward(g):
        if pred.requires_grad:
            pred.accumulate_grad((2.0 / n) * diff * g)

    return make_node(loss, (pred,), backward)
