"""Layer objects: thin parameter containers over the ops module.

Every layer exposes ``params`` (name -> Tensor, gradient-tracked) and
``buffers`` (name -> ndarray, persistent but not trained). Construction
draws from a caller-supplied Generator so a model seed fixes every weight.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import ops
from .init import glorot_uniform, lstm_bias
from .tensor import Tensor


class Conv1d:
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator):
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        w = glorot_uniform(rng, (kernel, in_ch, out_ch), kernel * in_ch, kernel * out_ch)
        self.w = Tensor(w, requires_grad=True)
        self.b = Tensor(np.zeros(out_ch), requires_grad=True)
        self.params = {"w": self.w, "b": self.b}
        self.buffers = {}

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.w, self.b)


class Dense:
    def __init__(self, in_dim: int, out_dim: int, activation, rng: np.random.Generator):
        if activation not in ("relu", "softmax", None):
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim, self.out_dim, self.activation = in_dim, out_dim, activation
        self.w = Tensor(glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)
        self.params = {"w": self.w, "b": self.b}
        self.buffers = {}

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(
                f"dense expects {self.in_dim} input features, got {x.shape}"
            )
        out = ops.add(ops.matmul(x, self.w), self.b)
        if self.activation == "relu":
            return ops.relu(out)
        if self.activation == "softmax":
            return ops.softmax(out)
        return out


class BatchNorm1d:
    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.9):
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.params = {"gamma": self.gamma, "beta": self.beta}
        self.buffers = {"running_mean": self.running_mean, "running_var": self.running_var}

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if x.shape[-1] != self.channels:
            raise ShapeError(f"batch_norm expects {self.channels} channels, got {x.shape}")
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=training,
            momentum=self.momentum,
            eps=self.eps,
        )


class BiLSTM:
    """Two LSTMs over opposite time directions with independent weights.

    Returns the full output sequence [B, T, 2U] and the fixed-size summary
    [B, 2U]: forward hidden state at the last step next to backward hidden
    state at the first step.
    """

    def __init__(self, in_dim: int, units: int, rng: np.random.Generator):
        self.in_dim, self.units = in_dim, units

        def direction():
            wx = glorot_uniform(rng, (in_dim, 4 * units), in_dim, 4 * units)
            wh = glorot_uniform(rng, (units, 4 * units), units, 4 * units)
            return (
                Tensor(wx, requires_grad=True),
                Tensor(wh, requires_grad=True),
                Tensor(lstm_bias(units), requires_grad=True),
            )

        self.wx_f, self.wh_f, self.b_f = direction()
        self.wx_b, self.wh_b, self.b_b = direction()
        self.params = {
            "fw.wx": self.wx_f,
            "fw.wh": self.wh_f,
            "fw.b": self.b_f,
            "bw.wx": self.wx_b,
            "bw.wh": self.wh_b,
            "bw.b": self.b_b,
        }
        self.buffers = {}

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(
                f"bilstm expects [B, T, {self.in_dim}], got {x.shape}"
            )
        xp_f = ops.add(ops.matmul(x, self.wx_f), self.b_f)
        h_f = ops.lstm_seq(xp_f, self.wh_f)

        x_rev = ops.flip_time(x)
        xp_b = ops.add(ops.matmul(x_rev, self.wx_b), self.b_b)
        h_b = ops.flip_time(ops.lstm_seq(xp_b, self.wh_b))

        outputs = ops.concat([h_f, h_b], axis=2)
        final = ops.concat([ops.time_step(h_f, -1), ops.time_step(h_b, 0)], axis=1)
        return outputs, final
