"""Layered run configuration: packaged defaults <- YAML file <- CLI overrides.

Defaults are the headline experiment settings (60 s windows on native-rate
data, 20 Hz target rate, the standard hyperparameters, the five-channel
feature set). Every resolved run directory gets the exact config written
back out, so runs are reproducible from config + seed alone.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .dsp import FeatureConfig, SensorFeatures
from .errors import ConfigError
from .model import ModelConfig
from .synth import SynthSpec
from .train import TrainConfig

DEFAULT_CONFIG: dict = {
    "data": {
        "kind": "synth",
        "shl_dir": None,
        "sample_rate_hz": 100.0,
        "require_labels": True,
        "manifest": None,
        "synth": {
            "frames_per_mode": 50,
            "frame_s": 5.0,
            "sample_rate_hz": 100.0,
            "transition_fraction": 0.0,
            "seed": 7,
        },
    },
    "features": {
        "accel": {"xyz": False, "magnitude": True, "jerk": True},
        "gyro": {"xyz": True, "magnitude": True, "jerk": False},
        "mag": {"xyz": False, "magnitude": False, "jerk": True},
        "smoothing_m": 5,
    },
    "window_s": None,  # null keeps the native frame length
    "target_hz": 20.0,
    "model": {
        "conv_stack": [[32, 15, True], [64, 10, False], [64, 10, True], [128, 5, True], [128, 5, True]],
        "num_conv_layers": 5,
        "pool_size": 4,
        "pool_stride": 2,
        "pyramid_taps": [1, 2, 3, 5],
        "bilstm_units": 128,
        "dense_sizes": [128, 8],
        "bn_eps": 1.0e-5,
        "bn_momentum": 0.9,
    },
    "train": {
        "batch_size": 50,
        "lr": 1.0e-4,
        "min_lr": 1.0e-5,
        "lr_factor": 0.2,
        "beta1": 0.9,
        "beta2": 0.999,
        "l2": 0.001,
        "early_stop_patience": 5,
        "lr_patience": 3,
        "max_epochs": 100,
        "split_ratio": 0.9,
        "single_threaded": False,
    },
    "seeds": [0],
    "output_dir": "runs/default",
    "cache_dir": None,  # null puts the cache under output_dir/cache
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_set_override(expr: str) -> dict:
    """Turn 'train.lr=0.0002' into the nested dict {'train': {'lr': 0.0002}}."""
    if "=" not in expr:
        raise ConfigError(f"--set expects key.path=value, got {expr!r}")
    key_path, raw = expr.split("=", 1)
    value = yaml.safe_load(raw)
    node: dict = {}
    out = node
    parts = [p for p in key_path.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"--set has an empty key path: {expr!r}")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return out


@dataclass
class RunConfig:
    """A fully resolved configuration with typed accessors."""

    raw: dict

    @classmethod
    def load(cls, path=None, overrides: Optional[list] = None) -> "RunConfig":
        cfg = copy.deepcopy(DEFAULT_CONFIG)
        if path is not None:
            with open(path) as fh:
                file_cfg = yaml.safe_load(fh) or {}
            if not isinstance(file_cfg, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            cfg = deep_merge(cfg, file_cfg)
        for expr in overrides or []:
            cfg = deep_merge(cfg, parse_set_override(expr))
        run = cls(cfg)
        run.validate()
        return run

    def validate(self):
        kind = self.raw["data"]["kind"]
        if kind not in ("synth", "shl"):
            raise ConfigError(f"data.kind must be 'synth' or 'shl', got {kind!r}")
        if kind == "shl" and not self.raw["data"].get("shl_dir"):
            raise ConfigError("data.kind is 'shl' but data.shl_dir is not set")
        self.downsample_factor()  # raises when target_hz does not divide the rate
        self.feature_config()
        self.model_config()
        self.train_config(seed=0)

    # ---- typed accessors -------------------------------------------------

    def native_rate_hz(self) -> float:
        if self.raw["data"]["kind"] == "synth":
            return float(self.raw["data"]["synth"]["sample_rate_hz"])
        return float(self.raw["data"]["sample_rate_hz"])

    def target_hz(self) -> float:
        return float(self.raw["target_hz"])

    def window_s(self) -> Optional[float]:
        value = self.raw["window_s"]
        return None if value is None else float(value)

    def downsample_factor(self) -> int:
        native = self.native_rate_hz()
        target = self.target_hz()
        factor = native / target
        if abs(factor - round(factor)) > 1e-9 or factor < 1:
            raise ConfigError(
                f"target_hz {target:g} must divide the native rate {native:g} "
                f"by an integer factor, got {factor:g}"
            )
        return int(round(factor))

    def feature_config(self) -> FeatureConfig:
        f = self.raw["features"]

        def sensor(d):
            return SensorFeatures(
                xyz=bool(d["xyz"]), magnitude=bool(d["magnitude"]), jerk=bool(d["jerk"])
            )

        return FeatureConfig(
            accel=sensor(f["accel"]),
            gyro=sensor(f["gyro"]),
            mag=sensor(f["mag"]),
            smoothing_m=int(f["smoothing_m"]),
            downsample_S=self.downsample_factor(),
        )

    def model_config(self) -> ModelConfig:
        m = dict(self.raw["model"])
        m["channel_widths"] = list(self.feature_config().channel_widths())
        return ModelConfig.from_dict(m)

    def train_config(self, seed: int) -> TrainConfig:
        t = self.raw["train"]
        return TrainConfig(
            batch_size=int(t["batch_size"]),
            lr=float(t["lr"]),
            min_lr=float(t["min_lr"]),
            lr_factor=float(t["lr_factor"]),
            beta1=float(t["beta1"]),
            beta2=float(t["beta2"]),
            l2=float(t["l2"]),
            early_stop_patience=int(t["early_stop_patience"]),
            lr_patience=int(t["lr_patience"]),
            max_epochs=int(t["max_epochs"]),
            seed=int(seed),
            split_ratio=float(t["split_ratio"]),
            single_threaded=bool(t["single_threaded"]),
        )

    def synth_spec(self) -> SynthSpec:
        s = self.raw["data"]["synth"]
        return SynthSpec(
            frames_per_mode=int(s["frames_per_mode"]),
            frame_s=float(s["frame_s"]),
            sample_rate_hz=float(s["sample_rate_hz"]),
            transition_fraction=float(s["transition_fraction"]),
        )

    def synth_seed(self) -> int:
        return int(self.raw["data"]["synth"]["seed"])

    def seeds(self) -> list:
        seeds = self.raw["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError(f"seeds must be a non-empty list, got {seeds!r}")
        return [int(s) for s in seeds]

    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    def cache_dir(self) -> Path:
        value = self.raw["cache_dir"]
        return Path(value) if value else self.output_dir() / "cache"

    def dump_yaml(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(self.raw, fh, sort_keys=True)
