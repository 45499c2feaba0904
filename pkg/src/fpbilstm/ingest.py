"""Sensor-frame ingestion: challenge-format text files, windowing, labels.

The on-disk layout is one whitespace-separated text file per sensor axis
(one frame per line) plus a label file of identical geometry holding one
mode id per sample. Loaders validate geometry strictly and report the
offending file/line instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError, StructuralError

SENSORS = ("acc", "gyr", "mag")
AXES = ("x", "y", "z")

MODE_NAMES = {
    1: "Still",
    2: "Walk",
    3: "Run",
    4: "Bike",
    5: "Car",
    6: "Bus",
    7: "Train",
    8: "Subway",
}
MODE_IDS = {name: mode_id for mode_id, name in MODE_NAMES.items()}
NUM_MODES = 8

# Challenge-distribution file names; a manifest argument overrides these.
DEFAULT_FILE_NAMES = {
    ("acc", "x"): "Acc_x.txt",
    ("acc", "y"): "Acc_y.txt",
    ("acc", "z"): "Acc_z.txt",
    ("gyr", "x"): "Gyr_x.txt",
    ("gyr", "y"): "Gyr_y.txt",
    ("gyr", "z"): "Gyr_z.txt",
    ("mag", "x"): "Mag_x.txt",
    ("mag", "y"): "Mag_y.txt",
    ("mag", "z"): "Mag_z.txt",
}
DEFAULT_LABEL_NAME = "Label.txt"

SPLIT_TAGS = ("train", "sub-train", "sub-validation", "test")


@dataclass
class RawFrame:
    """One fixed-length window of tri-axis samples from all three sensors.

    ``samples`` maps sensor name ("acc", "gyr", "mag") to a [T, 3] float
    array in x/y/z column order. ``labels`` holds one mode id per sample;
    it may be None for unlabeled (prediction-only) data.
    """

    samples: dict[str, np.ndarray]
    sample_rate_hz: float
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise StructuralError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        lengths = set()
        for sensor in SENSORS:
            if sensor not in self.samples:
                raise StructuralError(f"missing sensor {sensor!r} in frame")
            arr = np.asarray(self.samples[sensor], dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise StructuralError(f"sensor {sensor!r} must be [T, 3], got shape {arr.shape}")
            self.samples[sensor] = arr
            lengths.add(arr.shape[0])
        if len(lengths) != 1:
            raise StructuralError(f"sensors disagree on frame length: {sorted(lengths)}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.length,):
                raise StructuralError(
                    f"labels length {self.labels.shape} does not match frame length {self.length}"
                )
            bad = (self.labels < 1) | (self.labels > NUM_MODES)
            if bad.any():
                where = int(np.argmax(bad))
                raise StructuralError(
                    f"label out of range 1..{NUM_MODES} at sample {where}: {self.labels[where]}"
                )

    @property
    def length(self) -> int:
        return self.samples[SENSORS[0]].shape[0]

    @property
    def duration_s(self) -> float:
        return self.length / self.sample_rate_hz


@dataclass
class Dataset:
    """An ordered collection of frames sharing one rate and length."""

    frames: list[RawFrame]
    split_tag: str = "train"

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise StructuralError(f"split_tag must be one of {SPLIT_TAGS}, got {self.split_tag!r}")
        rates = {f.sample_rate_hz for f in self.frames}
        lengths = {f.length for f in self.frames}
        if len(rates) > 1:
            raise StructuralError(f"frames disagree on sample rate: {sorted(rates)}")
        if len(lengths) > 1:
            raise StructuralError(f"frames disagree on length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def sample_rate_hz(self) -> float:
        return self.frames[0].sample_rate_hz

    @property
    def frame_length(self) -> int:
        return self.frames[0].length

    def frame_labels(self) -> np.ndarray:
        """Majority label per frame, as an int array."""
        return np.array([majority_label(f.labels) for f in self.frames], dtype=np.int64)


def _read_matrix(path: Path, dtype) -> np.ndarray:
    """Read a whitespace-separated numeric matrix, one frame per line.

    Fast path goes through pandas; on failure the file is re-scanned line
    by line to produce an error that names the file, line, and token.
    """
    if not path.is_file():
        raise StructuralError(f"missing data file: {path}")
    try:
        import pandas as pd

        frame = pd.read_csv(
            path, sep=r"\s+", header=None, dtype=np.float64, float_precision="round_trip"
        )
        if frame.isna().to_numpy().any():
            raise ValueError("ragged or non-numeric content")
        return frame.to_numpy().astype(dtype)
    except Exception:
        return _read_matrix_diagnostic(path, dtype)


def _read_matrix_diagnostic(path: Path, dtype) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            values = []
            for col, tok in enumerate(tokens, start=1):
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(
                        f"{path.name}:{lineno}: column {col}: cannot parse {tok!r} as a number"
                    ) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise StructuralError(
                    f"{path.name}:{lineno}: expected {width} values per line, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise StructuralError(f"{path.name}: file contains no data lines")
    return np.asarray(rows, dtype=dtype)


def load_shl(
    dir_path,
    split_tag: str = "train",
    sample_rate_hz: float = 100.0,
    manifest: Optional[dict] = None,
    require_labels: bool = True,
) -> Dataset:
    """Load a challenge-format directory into a Dataset.

    ``manifest`` may remap file names: keys are (sensor, axis) tuples plus
    the string "label". Labels are mandatory unless ``require_labels`` is
    False (prediction-only data); when the label file is present it is
    loaded and validated either way.
    """
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise StructuralError(f"not a directory: {dir_path}")

    names = dict(DEFAULT_FILE_NAMES)
    label_name = DEFAULT_LABEL_NAME
    if manifest:
        for key, value in manifest.items():
            if key == "label":
                label_name = value
            else:
                names[tuple(key)] = value

    matrices: dict[tuple, np.ndarray] = {}
    geometry: Optional[tuple] = None
    geometry_file = None
    for sensor in SENSORS:
        for axis in AXES:
            path = dir_path / names[(sensor, axis)]
            mat = _read_matrix(path, np.float64)
            if geometry is None:
                geometry, geometry_file = mat.shape, path.name
            elif mat.shape != geometry:
                raise StructuralError(
                    f"{path.name}: geometry {mat.shape} does not match "
                    f"{geometry_file} {geometry}"
                )
            matrices[(sensor, axis)] = mat

    label_path = dir_path / label_name
    labels = None
    if label_path.is_file():
        raw = _read_matrix(label_path, np.float64)
        if raw.shape != geometry:
            raise StructuralError(
                f"{label_path.name}: geometry {raw.shape} does not match {geometry_file} {geometry}"
            )
        rounded = np.rint(raw)
        if not np.array_equal(rounded, raw):
            bad = np.argwhere(rounded != raw)[0]
            raise ParseError(
                f"{label_path.name}:{bad[0] + 1}: column {bad[1] + 1}: non-integer label {raw[tuple(bad)]}"
            )
        labels = rounded.astype(np.int64)
    elif require_labels:
        raise StructuralError(f"missing label file: {label_path}")

    n_frames, frame_len = geometry
    frames = []
    for i in range(n_frames):
        samples = {
            sensor: np.stack([matrices[(sensor, axis)][i] for axis in AXES], axis=1)
            for sensor in SENSORS
        }
        frames.append(
            RawFrame(
                samples=samples,
                sample_rate_hz=sample_rate_hz,
                labels=None if labels is None else labels[i],
            )
        )
    return Dataset(frames=frames, split_tag=split_tag)


def write_shl(ds: Dataset, dir_path, manifest: Optional[dict] = None) -> None:
    """Write a Dataset in the challenge text format (%.17g round-trips float64)."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    names = dict(DEFAULT_FILE_NAMES)
    label_name = DEFAULT_LABEL_NAME
    if manifest:
        for key, value in manifest.items():
            if key == "label":
                label_name = value
            else:
                names[tuple(key)] = value

    for sensor in SENSORS:
        for ax_idx, axis in enumerate(AXES):
            mat = np.stack([f.samples[sensor][:, ax_idx] for f in ds.frames])
            np.savetxt(dir_path / names[(sensor, axis)], mat, fmt="%.17g", delimiter=" ")
    if all(f.labels is not None for f in ds.frames):
        mat = np.stack([f.labels for f in ds.frames])
        np.savetxt(dir_path / label_name, mat, fmt="%d", delimiter=" ")


def _window_divisors(frame_len: int, rate: float) -> list[float]:
    """Window lengths in seconds that split a frame exactly."""
    out = []
    for d in range(1, frame_len + 1):
        if frame_len % d == 0:
            out.append(d / rate)
    return sorted(out, reverse=True)


def reframe(ds: Dataset, window_s: float) -> Dataset:
    """Split every frame into consecutive non-overlapping sub-frames.

    The window must divide the frame duration exactly; labels are carried
    sample-wise, frame order and temporal order are preserved.
    """
    rate = ds.sample_rate_hz
    frame_len = ds.frame_length
    win = window_s * rate
    win_samples = int(round(win))
    if abs(win - win_samples) > 1e-9 or win_samples <= 0 or frame_len % win_samples != 0:
        valid = _window_divisors(frame_len, rate)
        shown = ", ".join(f"{v:g}" for v in valid[:24])
        raise StructuralError(
            f"window {window_s:g} s does not divide the {frame_len / rate:g} s frame exactly; "
            f"valid windows (s): {shown}"
        )
    parts = frame_len // win_samples
    frames = []
    for frame in ds.frames:
        for p in range(parts):
            lo, hi = p * win_samples, (p + 1) * win_samples
            frames.append(
                RawFrame(
                    samples={s: frame.samples[s][lo:hi] for s in SENSORS},
                    sample_rate_hz=rate,
                    labels=None if frame.labels is None else frame.labels[lo:hi],
                )
            )
    return Dataset(frames=frames, split_tag=ds.split_tag)


def majority_label(labels: Optional[Sequence[int]]) -> int:
    """Most frequent mode id; ties resolve to the smallest id."""
    if labels is None or len(labels) == 0:
        raise ValueError("majority_label needs a non-empty label sequence")
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=NUM_MODES + 1)
    # argmax returns the first (smallest) index on ties
    return int(np.argmax(counts[1:])) + 1


def transition_ratio(ds: Dataset) -> float:
    """Percentage of frames whose samples span more than one mode."""
    if len(ds) == 0:
        raise ValueError("transition_ratio of an empty dataset")
    mixed = 0
    for frame in ds.frames:
        if frame.labels is None:
            raise ValueError("transition_ratio needs labeled frames")
        if np.unique(frame.labels).size > 1:
            mixed += 1
    return 100.0 * mixed / len(ds)
