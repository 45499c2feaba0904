"""The pyramid-tapped CNN + biLSTM classifier, fully config-driven.

Each input channel runs through its own conv/pool stack (shared
hyperparameters, independent weights). At every tapped pool level the
streams' feature maps are concatenated along the feature axis and fed to
that level's own biLSTM; the biLSTM summaries are concatenated and pushed
through two dense layers ending in softmax over the eight modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .ingest import NUM_MODES
from .nn import ops
from .nn.layers import BatchNorm1d, BiLSTM, Conv1d, Dense
from .nn.tensor import Tensor, as_tensor

# Seed stream tags so model init, shuffling, and splitting never collide.
MODEL_INIT_STREAM = 101


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: int
    batch_norm_before: bool


DEFAULT_CONV_STACK = (
    ConvSpec(32, 15, True),
    ConvSpec(64, 10, False),
    ConvSpec(64, 10, True),
    ConvSpec(128, 5, True),
    ConvSpec(128, 5, True),
)
DEFAULT_TAPS = (1, 2, 3, 5)
DEFAULT_CHANNEL_WIDTHS = (3, 1, 3, 3, 1)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; ablations are alternative configs."""

    channel_widths: tuple = DEFAULT_CHANNEL_WIDTHS
    conv_stack: tuple = DEFAULT_CONV_STACK
    num_conv_layers: int = 5
    pool_size: int = 4
    pool_stride: int = 2
    pyramid_taps: tuple = DEFAULT_TAPS
    bilstm_units: int = 128
    dense_sizes: tuple = (128, NUM_MODES)
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        if not self.channel_widths:
            raise ConfigError("model needs at least one input channel")
        if any(w not in (1, 3) for w in self.channel_widths):
            raise ConfigError(f"channel widths must be 1 or 3, got {self.channel_widths}")
        if not 1 <= self.num_conv_layers <= len(self.conv_stack):
            raise ConfigError(
                f"num_conv_layers must be in 1..{len(self.conv_stack)}, got {self.num_conv_layers}"
            )
        for spec in self.conv_stack:
            if spec.filters < 1 or spec.kernel < 1:
                raise ConfigError(f"conv filters/kernels must be positive: {spec}")
        taps = tuple(self.pyramid_taps)
        if not taps or sorted(set(taps)) != sorted(taps):
            raise ConfigError(f"pyramid_taps must be non-empty and unique, got {taps}")
        if any(t < 1 or t > self.num_conv_layers for t in taps):
            raise ConfigError(
                f"pyramid_taps {taps} reference pool levels beyond the "
                f"{self.num_conv_layers} configured conv layers"
            )
        if len(self.dense_sizes) != 2 or self.dense_sizes[-1] != NUM_MODES:
            raise ConfigError(
                f"dense_sizes must be (hidden, {NUM_MODES}), got {self.dense_sizes}"
            )
        if self.bilstm_units < 1 or self.pool_size < 1 or self.pool_stride < 1:
            raise ConfigError("bilstm_units, pool_size, pool_stride must be positive")

    @property
    def active_stack(self) -> tuple:
        return tuple(self.conv_stack[: self.num_conv_layers])

    @property
    def sorted_taps(self) -> tuple:
        return tuple(sorted(self.pyramid_taps))

    def to_dict(self) -> dict:
        return {
            "channel_widths": list(self.channel_widths),
            "conv_stack": [[s.filters, s.kernel, s.batch_norm_before] for s in self.conv_stack],
            "num_conv_layers": self.num_conv_layers,
            "pool_size": self.pool_size,
            "pool_stride": self.pool_stride,
            "pyramid_taps": list(self.pyramid_taps),
            "bilstm_units": self.bilstm_units,
            "dense_sizes": list(self.dense_sizes),
            "bn_eps": self.bn_eps,
            "bn_momentum": self.bn_momentum,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "conv_stack" in d:
            d["conv_stack"] = tuple(ConvSpec(int(f), int(k), bool(bn)) for f, k, bn in d["conv_stack"])
        for key in ("channel_widths", "pyramid_taps", "dense_sizes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _layer_in_widths(cfg: ModelConfig, channel_width: int) -> list[int]:
    """Input feature width of each conv layer in one stream."""
    widths = [channel_width]
    for spec in cfg.active_stack[:-1]:
        widths.append(spec.filters)
    return widths


class FPBiLSTM:
    """Network instance with named parameters and a deterministic seed."""

    L2_PARAM = "dense1.w"

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), MODEL_INIT_STREAM]))
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}

        self.streams = []
        for i, width in enumerate(cfg.channel_widths):
            stack = []
            in_widths = _layer_in_widths(cfg, width)
            for j, spec in enumerate(cfg.active_stack, start=1):
                bn = None
                if spec.batch_norm_before:
                    bn = BatchNorm1d(in_widths[j - 1], eps=cfg.bn_eps, momentum=cfg.bn_momentum)
                    self._register(f"stream{i}.bn{j}", bn)
                conv = Conv1d(in_widths[j - 1], spec.filters, spec.kernel, rng)
                self._register(f"stream{i}.conv{j}", conv)
                stack.append((bn, conv))
            self.streams.append(stack)

        n_streams = len(cfg.channel_widths)
        self.taps = {}
        for p in cfg.sorted_taps:
            tap_width = n_streams * cfg.active_stack[p - 1].filters
            bilstm = BiLSTM(tap_width, cfg.bilstm_units, rng)
            self._register(f"tap{p}", bilstm)
            self.taps[p] = bilstm

        summary_dim = len(cfg.sorted_taps) * 2 * cfg.bilstm_units
        self.dense1 = Dense(summary_dim, cfg.dense_sizes[0], "relu", rng)
        self._register("dense1", self.dense1)
        self.dense2 = Dense(cfg.dense_sizes[0], cfg.dense_sizes[1], "softmax", rng)
        self._register("dense2", self.dense2)

    def _register(self, prefix: str, layer):
        for name, p in layer.params.items():
            self.params[f"{prefix}.{name}"] = p
        for name, b in layer.buffers.items():
            self.buffers[f"{prefix}.{name}"] = b

    def forward(self, channels: Sequence, training: bool = False) -> Tensor:
        """channels: one [B, L, width] array or Tensor per input channel."""
        cfg = self.cfg
        if len(channels) != len(cfg.channel_widths):
            raise ConfigError(
                f"model wired for {len(cfg.channel_widths)} channels, got {len(channels)}"
            )
        taps = {p: [] for p in cfg.sorted_taps}
        for i, (x, stack) in enumerate(zip(channels, self.streams)):
            h = as_tensor(x)
            if h.shape[2] != cfg.channel_widths[i]:
                raise ConfigError(
                    f"channel {i} width {h.shape[2]} does not match config "
                    f"width {cfg.channel_widths[i]}"
                )
            for j, (bn, conv) in enumerate(stack, start=1):
                if bn is not None:
                    h = bn(h, training=training)
                h = ops.relu(conv(h))
                h = ops.maxpool1d(h, cfg.pool_size, cfg.pool_stride)
                if j in taps:
                    taps[j].append(h)

        finals = []
        for p in cfg.sorted_taps:
            fused = ops.concat(taps[p], axis=2)
            _, final = self.taps[p](fused)
            finals.append(final)
        summary = ops.concat(finals, axis=1)
        return self.dense2(self.dense1(summary))

    def state_arrays(self) -> tuple[dict, dict]:
        """Copies of all parameters and buffers, for snapshots/checkpoints."""
        return (
            {k: v.data.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
        )

    def load_state_arrays(self, params: dict, buffers: dict):
        for k, v in self.params.items():
            v.data[...] = params[k]
        for k, v in self.buffers.items():
            v[...] = buffers[k]


def predict(probs) -> np.ndarray:
    """Mode ids from probability rows; ties resolve to the smallest id."""
    data = probs.data if isinstance(probs, Tensor) else np.asarray(probs)
    return np.argmax(data, axis=1).astype(np.int64) + 1


@dataclass
class ModelSummary:
    parameter_count: int
    buffer_count: int
    tap_lengths: dict
    tap_widths: dict
    mac_count: int
    rows: list = field(default_factory=list)  # (name, shape, count)

    def total_count(self) -> int:
        return self.parameter_count + self.buffer_count

    def to_text(self) -> str:
        lines = [f"{'layer':<24}{'shape':<20}{'params':>10}"]
        for name, shape, count in self.rows:
            lines.append(f"{name:<24}{str(shape):<20}{count:>10}")
        lines.append(f"trainable parameters: {self.parameter_count:,}")
        lines.append(f"persistent buffers:   {self.buffer_count:,}")
        lines.append(f"forward MACs/frame:   {self.mac_count:,}")
        for p in sorted(self.tap_lengths):
            lines.append(
                f"tap {p}: length {self.tap_lengths[p]}, feature width {self.tap_widths[p]}"
            )
        return "\n".join(lines)


def pooled_length_cascade(cfg: ModelConfig, input_len: int) -> list[int]:
    """Sequence length after each pool level."""
    lengths = []
    length = input_len
    for _ in cfg.active_stack:
        length = ops.pooled_length(length, cfg.pool_size, cfg.pool_stride)
        lengths.append(length)
    return lengths


def summarize(cfg: ModelConfig, input_len: int = 1200) -> ModelSummary:
    """Exact parameter/buffer counts and a MAC estimate, without allocating
    any weights.

    The MAC convention: multiply-accumulates of one single-frame forward
    pass (convolutions + recurrences + dense), pooling and normalization
    excluded.
    """
    rows = []
    param_count = 0
    buffer_count = 0
    macs = 0
    n_streams = len(cfg.channel_widths)
    cascade = pooled_length_cascade(cfg, input_len)

    for i, width in enumerate(cfg.channel_widths):
        in_widths = _layer_in_widths(cfg, width)
        length = input_len
        for j, spec in enumerate(cfg.active_stack, start=1):
            c_in = in_widths[j - 1]
            if spec.batch_norm_before:
                # gamma/beta plus the two running-stat buffers
                rows.append((f"stream{i}.bn{j}", (c_in,), 4 * c_in))
                param_count += 2 * c_in
                buffer_count += 2 * c_in
            w_count = spec.kernel * c_in * spec.filters
            rows.append((f"stream{i}.conv{j}", (spec.kernel, c_in, spec.filters), w_count + spec.filters))
            param_count += w_count + spec.filters
            macs += length * spec.kernel * c_in * spec.filters
            length = cascade[j - 1]

    units = cfg.bilstm_units
    tap_lengths = {}
    tap_widths = {}
    for p in cfg.sorted_taps:
        tap_width = n_streams * cfg.active_stack[p - 1].filters
        tap_lengths[p] = cascade[p - 1]
        tap_widths[p] = tap_width
        per_direction = 4 * units * (tap_width + units + 1)
        rows.append((f"tap{p}.bilstm", (tap_width, units), 2 * per_direction))
        param_count += 2 * per_direction
        macs += 2 * cascade[p - 1] * 4 * units * (tap_width + units)

    summary_dim = len(cfg.sorted_taps) * 2 * units
    d1 = summary_dim * cfg.dense_sizes[0] + cfg.dense_sizes[0]
    d2 = cfg.dense_sizes[0] * cfg.dense_sizes[1] + cfg.dense_sizes[1]
    rows.append(("dense1", (summary_dim, cfg.dense_sizes[0]), d1))
    rows.append(("dense2", (cfg.dense_sizes[0], cfg.dense_sizes[1]), d2))
    param_count += d1 + d2
    macs += summary_dim * cfg.dense_sizes[0] + cfg.dense_sizes[0] * cfg.dense_sizes[1]

    return ModelSummary(
        parameter_count=param_count,
        buffer_count=buffer_count,
        tap_lengths=tap_lengths,
        tap_widths=tap_widths,
        mac_count=macs,
        rows=rows,
    )


def conv_depth_taps(default_taps: Sequence[int], num_layers: int) -> tuple:
    """Tap set when truncating the stack to ``num_layers``: keep the default
    taps that still exist and always tap the last remaining pool level."""
    kept = {t for t in default_taps if t <= num_layers}
    kept.add(num_layers)
    return tuple(sorted(kept))
