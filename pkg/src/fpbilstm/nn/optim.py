"""Adam with optional per-parameter L2 gradient augmentation, and a
plateau-driven learning-rate schedule."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDiverged
from .tensor import Tensor


class Adam:
    """Bias-corrected Adam.

    Parameters named in ``l2_params`` get 2 * l2 * theta added to their
    gradient before the update (L2 penalty as gradient augmentation; the
    reported loss stays plain MSE).
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        l2: float = 0.0,
        l2_params: frozenset = frozenset(),
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.l2 = l2
        self.l2_params = frozenset(l2_params)
        unknown = self.l2_params - set(self.params)
        if unknown:
            raise KeyError(f"l2_params reference unknown parameters: {sorted(unknown)}")
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if not np.isfinite(g).all():
                raise TrainingDiverged(f"non-finite gradient in parameter {name!r}")
            if name in self.l2_params:
                g = g + 2.0 * self.l2 * p.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "step": self.step_count,
            "lr": self.lr,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict):
        self.step_count = int(state["step"])
        self.lr = float(state["lr"])
        for k in self.m:
            self.m[k][...] = state["m"][k]
            self.v[k][...] = state["v"][k]


class PlateauLR:
    """Multiply the learning rate by ``factor`` (floored at ``min_lr``) after
    ``patience`` consecutive epochs without improvement of the monitored
    value; the wait counter resets after each decay."""

    def __init__(self, optimizer: Adam, factor: float = 0.2, patience: int = 3, min_lr: float = 1e-5):
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = np.inf
        self.wait = 0

    def update(self, monitored: float) -> float:
        """Feed one epoch's monitored value; returns the (possibly decayed) lr."""
        if monitored < self.best:
            self.best = monitored
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.optimizer.lr = max(self.optimizer.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.optimizer.lr


def reduce_lr_on_plateau(
    lr: float,
    monitor_history,
    factor: float = 0.2,
    min_lr: float = 1e-5,
    patience: int = 3,
) -> float:
    """Stateless form: replay a monitored history and return the final lr."""

    class _Opt:
        pass

    opt = _Opt()
    opt.lr = lr
    sched = PlateauLR(opt, factor=factor, patience=patience, min_lr=min_lr)
    for value in monitor_history:
        sched.update(value)
    return opt.lr
