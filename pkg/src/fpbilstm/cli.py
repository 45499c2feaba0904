"""Command-line entry point.

Subcommands: synth, preprocess, train, eval, predict, sweep, ablate,
summarize. Every command resolves the layered config (defaults <- --config
file <- --set overrides), writes its outputs under --output, and exits
nonzero on error. Partial sweep/ablation results are flushed row by row.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .dsp import FeatureConfig, SensorFeatures
from .errors import ConfigError
from .ingest import MODE_NAMES, write_shl
from .metrics import per_frame_report
from .model import ModelConfig, conv_depth_taps, predict as predict_ids, summarize
from .nn.kernels import BACKEND
from .pipeline import (
    evaluate_checkpoint,
    median_inference_ms,
    prepare_channels,
    restore_model,
    run_training,
)
from .synth import synth_generate
from .train import evaluate


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-c", "--config", help="YAML config file layered over the defaults")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY.PATH=VALUE",
        help="override one config value, e.g. --set train.lr=0.0002",
    )
    parser.add_argument("-o", "--output", help="output directory (overrides output_dir)")
    parser.add_argument("--traceback", action="store_true", help="print stack traces on error")


def _resolve(args) -> RunConfig:
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f"output_dir={args.output}")
    return RunConfig.load(args.config, overrides)


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    ds = synth_generate(cfg.synth_spec(), seed=cfg.synth_seed())
    out = Path(args.data_dir) if args.data_dir else cfg.output_dir() / "synth"
    write_shl(ds, out)
    print(f"wrote {len(ds)} frames of {ds.frame_length} samples to {out}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = _resolve(args)
    prepared = prepare_channels(cfg)
    status = "hit" if prepared.cache_hit else "miss"
    print(
        f"cache {status} (key {prepared.cache_key}): {len(prepared.channels)} frames, "
        f"channels {list(prepared.channel_names)}, length {prepared.channels.arrays[0].shape[1]}"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.dump_yaml(out_dir / "config.resolved.yaml")
    prepared = prepare_channels(cfg)

    rows = []
    for seed in cfg.seeds():
        run = run_training(cfg, prepared, seed, out_dir, verbose=not args.quiet)
        last = run.result.log.records[-1]
        print(
            f"seed {seed}: best epoch {run.result.best_epoch} "
            f"(val_loss {run.result.best_val_loss:.5f}), "
            f"{len(run.result.log)} epochs, checkpoint {run.checkpoint_path}"
        )
        rows.append(
            {
                "seed": seed,
                "epochs": len(run.result.log),
                "best_epoch": run.result.best_epoch,
                "best_val_loss": run.result.best_val_loss,
                "final_val_acc": last.val_acc,
                "checkpoint": str(run.checkpoint_path),
            }
        )
    with open(out_dir / "training_summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    if args.data_dir:
        cfg.raw["data"]["kind"] = "shl"
        cfg.raw["data"]["shl_dir"] = args.data_dir
    prepared = prepare_channels(cfg)
    frame_report, sample_report, _ = evaluate_checkpoint(args.checkpoint, prepared)
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    for report, name in ((frame_report, "frame"), (sample_report, "sample")):
        (out_dir / f"eval_{name}.json").write_text(report.to_json())
        print(report.to_text())
        print()
    return 0


def cmd_predict(args) -> int:
    cfg = _resolve(args)
    if args.data_dir:
        cfg.raw["data"]["kind"] = "shl"
        cfg.raw["data"]["shl_dir"] = args.data_dir
        cfg.raw["data"]["require_labels"] = False
    prepared = prepare_channels(cfg, use_cache=False)
    from .checkpoint import load_checkpoint

    model = restore_model(load_checkpoint(args.checkpoint))
    preds = np.empty(len(prepared.channels), dtype=np.int64)
    for lo in range(0, len(prepared.channels), 100):
        batch = prepared.channels.select(slice(lo, lo + 100))
        probs = model.forward(batch.arrays, training=False)
        preds[lo : lo + len(batch)] = predict_ids(probs)
    out_path = Path(args.out) if args.out else cfg.output_dir() / "predictions.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "mode_id", "mode_name"])
        for i, p in enumerate(preds):
            writer.writerow([i, int(p), MODE_NAMES[int(p)]])
    print(f"wrote {preds.size} predictions to {out_path}")
    return 0


def _min_input_length(model_cfg: ModelConfig) -> int:
    """Smallest sequence length that survives the whole pool cascade."""
    need = 1
    for _ in range(model_cfg.num_conv_layers):
        need = (need - 1) * model_cfg.pool_stride + model_cfg.pool_size
    return need


def _parse_float_list(raw, default, what):
    if raw is None:
        return list(default)
    values = [float(tok) for tok in raw.split(",") if tok.strip()]
    if not values:
        raise ConfigError(f"sweep needs a non-empty {what} list, got {raw!r}")
    return values


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    windows = _parse_float_list(args.windows, [60.0], "window")
    rates = _parse_float_list(args.rates, [20.0], "rate")
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.dump_yaml(out_dir / "config.resolved.yaml")
    csv_path = out_dir / "sweep.csv"
    seed = cfg.seeds()[0]

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_s", "rate_hz", "unit", "accuracy", "macro_f1", "status"])
        fh.flush()
        for window in windows:
            for rate in rates:
                cell = RunConfig(
                    dict(cfg.raw, window_s=window, target_hz=rate)
                )
                try:
                    cell.validate()
                    prepared = prepare_channels(cell)
                    length = prepared.channels.arrays[0].shape[1]
                    model_cfg = cell.model_config()
                    need = _min_input_length(model_cfg)
                    if length < need:
                        raise ConfigError(
                            f"sequence length {length} is below the {need} the pool cascade needs"
                        )
                    run = run_training(cell, prepared, seed, out_dir / f"w{window:g}_r{rate:g}")
                    frame_rep, sample_rep, _ = evaluate_checkpoint(
                        run.checkpoint_path,
                        dataclasses.replace(
                            prepared,
                            channels=prepared.channels.select(run.val_idx),
                            dataset=_subset_dataset(prepared.dataset, run.val_idx),
                        ),
                    )
                except Exception as exc:  # noqa: BLE001 - each cell reports and moves on
                    print(f"skipping window {window:g} s at {rate:g} Hz: {exc}", file=sys.stderr)
                    writer.writerow([window, rate, "-", "", "", f"skipped: {exc}"])
                    fh.flush()
                    continue
                for rep, unit in ((frame_rep, "frame"), (sample_rep, "sample")):
                    writer.writerow(
                        [window, rate, unit, f"{rep.accuracy:.2f}", f"{rep.macro_f1:.2f}", "ok"]
                    )
                fh.flush()
                print(
                    f"window {window:g} s, {rate:g} Hz: "
                    f"frame acc {frame_rep.accuracy:.1f}, macro-F1 {frame_rep.macro_f1:.1f}"
                )
    print(f"sweep table: {csv_path}")
    return 0


def _subset_dataset(ds, idx):
    from .ingest import Dataset

    return Dataset([ds.frames[i] for i in idx], split_tag="sub-validation")


_SINGLE_FEATURE_ROWS = [
    ("A_xyz", {"accel": SensorFeatures(xyz=True)}),
    ("A_mag", {"accel": SensorFeatures(magnitude=True)}),
    ("A_jerk", {"accel": SensorFeatures(jerk=True)}),
    ("G_xyz", {"gyro": SensorFeatures(xyz=True)}),
    ("G_mag", {"gyro": SensorFeatures(magnitude=True)}),
    ("G_jerk", {"gyro": SensorFeatures(jerk=True)}),
    ("M_xyz", {"mag": SensorFeatures(xyz=True)}),
    ("M_mag", {"mag": SensorFeatures(magnitude=True)}),
    ("M_jerk", {"mag": SensorFeatures(jerk=True)}),
]

_COMBO_FEATURE_ROWS = [
    ("A:mag+jerk", {"accel": SensorFeatures(magnitude=True, jerk=True)}),
    ("G:xyz+mag", {"gyro": SensorFeatures(xyz=True, magnitude=True)}),
    (
        "A+G",
        {
            "accel": SensorFeatures(magnitude=True, jerk=True),
            "gyro": SensorFeatures(xyz=True, magnitude=True),
        },
    ),
    (
        "A+M",
        {
            "accel": SensorFeatures(magnitude=True, jerk=True),
            "mag": SensorFeatures(jerk=True),
        },
    ),
    (
        "G+M",
        {
            "gyro": SensorFeatures(xyz=True, magnitude=True),
            "mag": SensorFeatures(jerk=True),
        },
    ),
    (
        "A+G+M",
        {
            "accel": SensorFeatures(magnitude=True, jerk=True),
            "gyro": SensorFeatures(xyz=True, magnitude=True),
            "mag": SensorFeatures(jerk=True),
        },
    ),
]


def _ablation_grid(cfg: RunConfig, mode: str) -> list[tuple[str, dict, FeatureConfig]]:
    """Rows of (label, model-config overrides, feature config)."""
    base_features = cfg.feature_config()
    base_model = cfg.raw["model"]
    rows = []
    if mode == "conv_depth":
        for k in range(1, int(base_model["num_conv_layers"]) + 1):
            taps = conv_depth_taps(base_model["pyramid_taps"], k)
            rows.append(
                (f"conv1..{k}", {"num_conv_layers": k, "pyramid_taps": list(taps)}, base_features)
            )
    elif mode == "pyramid_taps":
        for taps in ((2, 3, 5), (3, 5), (5,), (1, 2, 3, 4, 5), tuple(base_model["pyramid_taps"])):
            rows.append((f"taps={{{','.join(map(str, taps))}}}", {"pyramid_taps": list(taps)}, base_features))
    elif mode == "features":
        empty = SensorFeatures()
        for label, sensors in _SINGLE_FEATURE_ROWS + _COMBO_FEATURE_ROWS:
            feats = FeatureConfig(
                accel=sensors.get("accel", empty),
                gyro=sensors.get("gyro", empty),
                mag=sensors.get("mag", empty),
                smoothing_m=base_features.smoothing_m,
                downsample_S=base_features.downsample_S,
            )
            rows.append((label, {}, feats))
    else:
        raise ConfigError(f"unknown ablation mode {mode!r}")
    return rows


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    rows = _ablation_grid(cfg, args.mode)
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.dump_yaml(out_dir / "config.resolved.yaml")
    csv_path = out_dir / f"ablate_{args.mode}.csv"
    seed = cfg.seeds()[0]

    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row", "label", "accuracy", "macro_f1", "params", "train_time_s", "inference_ms", "status"]
        )
        fh.flush()
        for row_id, (label, model_over, feats) in enumerate(rows, start=1):
            cell_raw = dict(cfg.raw)
            cell_raw["features"] = _features_to_raw(feats, cfg)
            cell_raw["model"] = {**cfg.raw["model"], **model_over}
            cell = RunConfig(cell_raw)
            try:
                cell.validate()
                model_cfg = cell.model_config()
                params = summarize(model_cfg, input_len=256).parameter_count
                prepared = prepare_channels(cell)
                t0 = time.perf_counter()
                run = run_training(cell, prepared, seed, out_dir / f"{args.mode}_{row_id}")
                train_time = time.perf_counter() - t0
                val = prepared.channels.select(run.val_idx)
                _, val_acc, preds = evaluate(run.result.model, val)
                report = per_frame_report(val.labels, preds)
                infer_ms = median_inference_ms(
                    run.result.model, prepared.channels, reps=args.timing_reps
                )
            except Exception as exc:  # noqa: BLE001 - record the row, keep going
                print(f"row {row_id} ({label}) failed: {exc}", file=sys.stderr)
                writer.writerow([row_id, label, "", "", "", "", "", f"failed: {exc}"])
                fh.flush()
                continue
            writer.writerow(
                [
                    row_id,
                    label,
                    f"{report.accuracy:.2f}",
                    f"{report.macro_f1:.2f}",
                    params,
                    f"{train_time:.1f}",
                    f"{infer_ms:.2f}",
                    "ok",
                ]
            )
            fh.flush()
            print(f"row {row_id} ({label}): acc {report.accuracy:.1f}, params {params:,}")
    print(f"ablation table: {csv_path}")
    return 0


def _features_to_raw(feats: FeatureConfig, cfg: RunConfig) -> dict:
    def sensor(sf: SensorFeatures) -> dict:
        return {"xyz": sf.xyz, "magnitude": sf.magnitude, "jerk": sf.jerk}

    return {
        "accel": sensor(feats.accel),
        "gyro": sensor(feats.gyro),
        "mag": sensor(feats.mag),
        "smoothing_m": feats.smoothing_m,
    }


def cmd_summarize(args) -> int:
    cfg = _resolve(args)
    model_cfg = cfg.model_config()
    summary = summarize(model_cfg, input_len=args.input_len)
    print(f"kernel backend: {BACKEND}")
    print(summary.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpbilstm",
        description="Transportation-mode detection pipeline: data prep, training, evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset in the text format")
    _add_common(p)
    p.add_argument("--data-dir", help="directory to write the text files into")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="build (or reuse) the channel cache")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one model per configured seed")
    _add_common(p)
    p.add_argument("-q", "--quiet", action="store_true", help="suppress per-epoch lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (per-frame and per-sample)")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", help="evaluate on this text-format directory instead")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="emit per-frame mode predictions (labels optional)")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", help="predict on this text-format directory")
    p.add_argument("--out", help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="train/evaluate a window x rate grid")
    _add_common(p)
    p.add_argument("--windows", help="comma list of window lengths in seconds, e.g. 60,30,20,10,5")
    p.add_argument("--rates", help="comma list of target rates in Hz, e.g. 100,50,25,20,10,5,1")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="run one of the standard ablation grids")
    _add_common(p)
    p.add_argument("--mode", required=True, choices=("conv_depth", "pyramid_taps", "features"))
    p.add_argument("--timing-reps", type=int, default=1000, help="forward passes for the timing median")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("summarize", help="print parameter/shape/MAC summary for the config")
    _add_common(p)
    p.add_argument("--input-len", type=int, default=1200)
    p.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        print(f"error: {exc}", file=sys.stderr)
        if getattr(args, "traceback", False):
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
