"""Glue between config, data, the preprocess cache, and training runs."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .dsp import FeatureConfig, build_channels
from .errors import CacheCollisionError
from .ingest import Dataset, load_shl, reframe
from .metrics import EvalReport, per_frame_report, per_sample_report
from .model import FPBiLSTM, ModelConfig
from .synth import synth_generate
from .train import ChannelBatches, FitResult, TrainConfig, evaluate, fit, stratified_split_indices


def load_dataset(cfg: RunConfig) -> Dataset:
    """Materialize the configured data source (synthetic or on-disk)."""
    data = cfg.raw["data"]
    if data["kind"] == "synth":
        return synth_generate(cfg.synth_spec(), seed=cfg.synth_seed())
    manifest = data.get("manifest")
    if manifest:
        manifest = {
            ("label" if k == "label" else tuple(k.split("_"))): v for k, v in manifest.items()
        }
    return load_shl(
        data["shl_dir"],
        sample_rate_hz=float(data["sample_rate_hz"]),
        manifest=manifest,
        require_labels=bool(data.get("require_labels", True)),
    )


def apply_window(ds: Dataset, window_s: Optional[float]) -> Dataset:
    return ds if window_s is None else reframe(ds, window_s)


def _data_fingerprint(cfg: RunConfig) -> str:
    data = cfg.raw["data"]
    h = hashlib.sha256()
    if data["kind"] == "synth":
        h.update(json.dumps(data["synth"], sort_keys=True).encode())
    else:
        root = Path(data["shl_dir"])
        for path in sorted(root.iterdir()):
            if not path.is_file():
                continue
            h.update(path.name.encode())
            with open(path, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
    return h.hexdigest()


def _cache_key(cfg: RunConfig) -> tuple[str, dict]:
    inputs = {
        "data": _data_fingerprint(cfg),
        "features": cfg.raw["features"],
        "window_s": cfg.window_s(),
        "target_hz": cfg.target_hz(),
        "native_rate_hz": cfg.native_rate_hz(),
    }
    key = hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()[:20]
    return key, inputs


@dataclass
class PreparedData:
    channels: ChannelBatches
    channel_names: tuple
    dataset: Dataset  # windowed frames, for per-sample scoring
    cache_hit: bool
    cache_key: str


def prepare_channels(cfg: RunConfig, use_cache: bool = True) -> PreparedData:
    """Window the dataset and build its channel arrays, through the cache.

    The cache key covers the data fingerprint, feature grid, window, and
    rates; a key collision with different recorded inputs is refused.
    """
    ds = apply_window(load_dataset(cfg), cfg.window_s())
    feature_cfg = cfg.feature_config()

    if not use_cache:
        channels = _build_all(ds, feature_cfg)
        return PreparedData(channels, feature_cfg.channel_names(), ds, False, "")

    key, inputs = _cache_key(cfg)
    cache_dir = cfg.cache_dir()
    npz_path = cache_dir / f"{key}.npz"
    manifest_path = cache_dir / f"{key}.json"

    if npz_path.is_file() and manifest_path.is_file():
        with open(manifest_path) as fh:
            recorded = json.load(fh)
        if recorded != inputs:
            raise CacheCollisionError(
                f"cache entry {key} was built from different inputs; "
                f"delete {cache_dir} and re-run preprocess"
            )
        with np.load(npz_path) as blob:
            names = tuple(str(n) for n in blob["names"])
            arrays = [blob[f"ch{i}"] for i in range(len(names))]
            labels = blob["labels"]
        return PreparedData(ChannelBatches(arrays, labels), names, ds, True, key)

    channels = _build_all(ds, feature_cfg)
    cache_dir.mkdir(parents=True, exist_ok=True)
    payload = {f"ch{i}": a for i, a in enumerate(channels.arrays)}
    payload["labels"] = channels.labels
    payload["names"] = np.array(feature_cfg.channel_names())
    np.savez(npz_path, **payload)
    with open(manifest_path, "w") as fh:
        json.dump(inputs, fh, indent=2, sort_keys=True)
    return PreparedData(channels, feature_cfg.channel_names(), ds, False, key)


def _build_all(ds: Dataset, feature_cfg: FeatureConfig) -> ChannelBatches:
    sets = [build_channels(frame, feature_cfg) for frame in ds.frames]
    return ChannelBatches.from_channel_sets(sets)


@dataclass
class TrainRun:
    seed: int
    result: FitResult
    checkpoint_path: Path
    log_path: Path
    train_idx: np.ndarray
    val_idx: np.ndarray


def run_training(
    cfg: RunConfig,
    prepared: PreparedData,
    seed: int,
    out_dir: Path,
    model_cfg: Optional[ModelConfig] = None,
    train_cfg: Optional[TrainConfig] = None,
    verbose: bool = False,
) -> TrainRun:
    """Stratified-split the prepared channels, fit, and persist the artifacts."""
    model_cfg = model_cfg or cfg.model_config()
    train_cfg = train_cfg or cfg.train_config(seed=seed)
    tr_idx, va_idx = stratified_split_indices(
        prepared.channels.labels, train_cfg.split_ratio, seed=seed
    )
    result = fit(
        prepared.channels.select(tr_idx),
        prepared.channels.select(va_idx),
        model_cfg,
        train_cfg,
        verbose=verbose,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / f"trainlog_seed{seed}.csv"
    result.log.to_csv(log_path)
    ckpt_path = out_dir / f"model_seed{seed}.ckpt"
    params, buffers = result.model.state_arrays()
    save_checkpoint(
        ckpt_path,
        Checkpoint(
            model_config=model_cfg.to_dict(),
            feature_config=_feature_dict(cfg),
            pipeline={
                "window_s": cfg.window_s(),
                "target_hz": cfg.target_hz(),
                "native_rate_hz": cfg.native_rate_hz(),
            },
            params=params,
            buffers=buffers,
            optimizer=result.optimizer_state,
            meta={
                "seed": seed,
                "best_epoch": result.best_epoch,
                "best_val_loss": result.best_val_loss,
                "epochs_run": len(result.log),
                "stopped_early": result.stopped_early,
            },
        ),
    )
    return TrainRun(
        seed=seed,
        result=result,
        checkpoint_path=ckpt_path,
        log_path=log_path,
        train_idx=tr_idx,
        val_idx=va_idx,
    )


def _feature_dict(cfg: RunConfig) -> dict:
    out = dict(cfg.raw["features"])
    out["downsample_S"] = cfg.downsample_factor()
    return out


def restore_model(ckpt: Checkpoint, seed: int = 0) -> FPBiLSTM:
    model = FPBiLSTM(ModelConfig.from_dict(ckpt.model_config), seed=seed)
    model.load_state_arrays(ckpt.params, ckpt.buffers)
    return model


def evaluate_checkpoint(
    ckpt_path, prepared: PreparedData, batch_size: int = 100
) -> tuple[EvalReport, EvalReport, np.ndarray]:
    """Per-frame and per-sample reports for a stored model on prepared data."""
    ckpt = load_checkpoint(ckpt_path)
    model = restore_model(ckpt)
    _, _, preds = evaluate(model, prepared.channels, batch_size=batch_size)
    frame_report = per_frame_report(prepared.channels.labels, preds)
    sample_report = per_sample_report(prepared.dataset.frames, preds)
    return frame_report, sample_report, preds


def median_inference_ms(model: FPBiLSTM, channels: ChannelBatches, reps: int = 1000) -> float:
    """Median single-frame forward time in milliseconds, warmup excluded."""
    single = channels.select(slice(0, 1))
    for _ in range(3):
        model.forward(single.arrays, training=False)
    times = []
    n = len(channels)
    for i in range(reps):
        one = channels.select(slice(i % n, i % n + 1))
        t0 = time.perf_counter()
        model.forward(one.arrays, training=False)
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))
