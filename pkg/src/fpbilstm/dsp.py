"""Series transforms feeding the classifier: smoothing, block-mean
downsampling, tri-axis magnitude, jerk, and channel assembly.

Pipeline order is fixed: smooth each axis at the native rate, downsample,
then derive magnitude/jerk from the downsampled axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .ingest import RawFrame, majority_label


@dataclass(frozen=True)
class Series:
    """A uniformly sampled scalar signal."""

    values: np.ndarray
    dt_s: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError(f"Series needs a non-empty 1-D array, got shape {self.values.shape}")
        if self.dt_s <= 0:
            raise ValueError(f"dt_s must be positive, got {self.dt_s}")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TriAxis:
    """Three axis series sharing one length and sampling period."""

    x: Series
    y: Series
    z: Series

    def __post_init__(self):
        if not (len(self.x) == len(self.y) == len(self.z)):
            raise ValueError("TriAxis axes must share one length")
        if not (self.x.dt_s == self.y.dt_s == self.z.dt_s):
            raise ValueError("TriAxis axes must share one sampling period")

    @classmethod
    def from_array(cls, arr: np.ndarray, dt_s: float) -> "TriAxis":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(Series(arr[:, 0], dt_s), Series(arr[:, 1], dt_s), Series(arr[:, 2], dt_s))

    def as_array(self) -> np.ndarray:
        return np.stack([self.x.values, self.y.values, self.z.values], axis=1)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dt_s(self) -> float:
        return self.x.dt_s


def smooth(s: Series, m: int) -> Series:
    """Centered moving average over m neighbors.

    Interior points average the m-point centered window. Boundary windows
    shrink symmetrically: the t-th point from the head averages the first
    2t-1 points, the t-th point from the tail the last 2t-1.
    """
    T = len(s)
    if m < 1 or m % 2 == 0:
        raise ValueError(f"smoothing width must be a positive odd integer, got {m}")
    if m > T:
        raise ValueError(f"smoothing width {m} exceeds series length {T}")
    v = s.values
    half = m // 2
    out = np.empty(T)
    # interior: indices half .. T-half-2 (0-based), full m-point windows
    n_interior = T - 2 * half - 1
    if n_interior > 0:
        out[half : half + n_interior] = sliding_window_view(v, m)[:n_interior].mean(axis=1)
    for i in range(half):
        out[i] = v[: 2 * i + 1].mean()
    tail_start = max(T - half - 1, half)
    for i in range(tail_start, T):
        out[i] = v[2 * i + 1 - T :].mean()
    return Series(out, s.dt_s)


def downsample(s: Series, S: int) -> Series:
    """Block means of S consecutive points; a trailing incomplete block is
    dropped. The sampling period scales by S."""
    if S < 1:
        raise ValueError(f"downsampling size must be >= 1, got {S}")
    T = len(s)
    if S > T:
        raise ValueError(f"downsampling size {S} exceeds series length {T}")
    n = T // S
    out = s.values[: n * S].reshape(n, S).mean(axis=1)
    return Series(out, s.dt_s * S)


def magnitude(t: TriAxis) -> Series:
    """Per-point Euclidean norm across the three axes (orientation-invariant)."""
    out = np.sqrt(t.x.values**2 + t.y.values**2 + t.z.values**2)
    return Series(out, t.dt_s)


def jerk(t: TriAxis) -> TriAxis:
    """Per-axis forward difference divided by the sampling period.

    The raw result has length T-1; the final value is repeated once so all
    derived channels stay length-aligned.
    """
    if len(t) < 2:
        raise ValueError(f"jerk needs at least 2 points, got {len(t)}")

    def one(series: Series) -> Series:
        d = np.diff(series.values) / series.dt_s
        return Series(np.append(d, d[-1]), series.dt_s)

    return TriAxis(one(t.x), one(t.y), one(t.z))


@dataclass(frozen=True)
class SensorFeatures:
    """Which derived features of one sensor feed the model."""

    xyz: bool = False
    magnitude: bool = False
    jerk: bool = False

    def any(self) -> bool:
        return self.xyz or self.magnitude or self.jerk


@dataclass(frozen=True)
class FeatureConfig:
    """Feature selection grid plus the shared smoothing/downsampling knobs.

    The default is the five-channel set the full model uses: accelerometer
    magnitude and jerk, gyroscope xyz and magnitude, magnetometer jerk.
    """

    accel: SensorFeatures = SensorFeatures(magnitude=True, jerk=True)
    gyro: SensorFeatures = SensorFeatures(xyz=True, magnitude=True)
    mag: SensorFeatures = SensorFeatures(jerk=True)
    smoothing_m: int = 5
    downsample_S: int = 5

    def __post_init__(self):
        if not (self.accel.any() or self.gyro.any() or self.mag.any()):
            raise ConfigError("FeatureConfig selects no features at all")
        if self.smoothing_m < 1 or self.smoothing_m % 2 == 0:
            raise ConfigError(f"smoothing_m must be a positive odd integer, got {self.smoothing_m}")
        if self.downsample_S < 1:
            raise ConfigError(f"downsample_S must be >= 1, got {self.downsample_S}")

    def channel_names(self) -> tuple[str, ...]:
        """Selected channel names in the fixed public order."""
        selected = set()
        for prefix, feats in (("A", self.accel), ("G", self.gyro), ("M", self.mag)):
            if feats.xyz:
                selected.add(f"{prefix}_xyz")
            if feats.magnitude:
                selected.add(f"{prefix}_mag")
            if feats.jerk:
                selected.add(f"{prefix}_jerk")
        return tuple(name for name in CHANNEL_ORDER if name in selected)

    def channel_widths(self) -> tuple[int, ...]:
        return tuple(CHANNEL_WIDTHS[name] for name in self.channel_names())


# Fixed channel precedence; the first five are the default feature set in
# model input order, the rest follow in sensor order.
CHANNEL_ORDER = (
    "A_jerk",
    "A_mag",
    "M_jerk",
    "G_xyz",
    "G_mag",
    "A_xyz",
    "G_jerk",
    "M_xyz",
    "M_mag",
)
CHANNEL_WIDTHS = {name: (1 if name.endswith("_mag") else 3) for name in CHANNEL_ORDER}

_SENSOR_BY_PREFIX = {"A": "acc", "G": "gyr", "M": "mag"}


@dataclass(frozen=True)
class Channel:
    """One named feature stream of width 1 or 3."""

    name: str
    values: np.ndarray  # [L, width]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 2 or self.values.shape[1] not in (1, 3):
            raise ValueError(f"channel {self.name!r} must be [L, 1|3], got {self.values.shape}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ChannelSet:
    """The derived feature streams of one frame, plus its majority label."""

    channels: tuple[Channel, ...]
    frame_label: Optional[int]

    def __post_init__(self):
        lengths = {len(c) for c in self.channels}
        if len(lengths) != 1:
            raise ValueError(f"channels disagree on length: {sorted(lengths)}")

    @property
    def length(self) -> int:
        return len(self.channels[0])

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    def widths(self) -> tuple[int, ...]:
        return tuple(c.width for c in self.channels)


def build_channels(frame: RawFrame, cfg: FeatureConfig) -> ChannelSet:
    """Assemble the selected channels for one frame.

    Every axis is smoothed at the native rate and block-mean downsampled;
    magnitude and jerk are derived from those processed axes. Channels come
    out in the fixed CHANNEL_ORDER and share one length.
    """
    dt = 1.0 / frame.sample_rate_hz
    processed: dict[str, TriAxis] = {}
    for sensor in ("acc", "gyr", "mag"):
        axes = []
        for k in range(3):
            s = Series(frame.samples[sensor][:, k], dt)
            axes.append(downsample(smooth(s, cfg.smoothing_m), cfg.downsample_S))
        processed[sensor] = TriAxis(*axes)

    by_prefix = {"A": cfg.accel, "G": cfg.gyro, "M": cfg.mag}
    channels = []
    for name in CHANNEL_ORDER:
        prefix, feature = name.split("_")
        feats = by_prefix[prefix]
        tri = processed[_SENSOR_BY_PREFIX[prefix]]
        if feature == "xyz" and feats.xyz:
            channels.append(Channel(name, tri.as_array()))
        elif feature == "mag" and feats.magnitude:
            channels.append(Channel(name, magnitude(tri).values[:, None]))
        elif feature == "jerk" and feats.jerk:
            channels.append(Channel(name, jerk(tri).as_array()))

    label = None if frame.labels is None else majority_label(frame.labels)
    return ChannelSet(channels=tuple(channels), frame_label=label)


def stack_channel_sets(sets: list[ChannelSet]) -> tuple[list[np.ndarray], np.ndarray]:
    """Stack per-frame ChannelSets into per-channel [N, L, width] arrays.

    Returns (arrays, labels); labels are 0 where a frame is unlabeled.
    """
    if not sets:
        raise ValueError("no channel sets to stack")
    names = sets[0].names()
    for cs in sets:
        if cs.names() != names:
            raise ValueError(f"channel sets disagree: {cs.names()} vs {names}")
    arrays = [
        np.stack([cs.channels[i].values for cs in sets], axis=0) for i in range(len(names))
    ]
    labels = np.array(
        [0 if cs.frame_label is None else cs.frame_label for cs in sets], dtype=np.int64
    )
    return arrays, labels
