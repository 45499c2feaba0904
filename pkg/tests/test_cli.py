import csv
import json

import numpy as np
import pytest
import yaml
from tests_cli_util import TINY_MODEL_YAML

from fpbilstm.cli import _ablation_grid, main
from fpbilstm.config import RunConfig, parse_set_override
from fpbilstm.errors import CacheCollisionError, ConfigError
from fpbilstm.pipeline import prepare_channels


def tiny_config(tmp_path, **extra):
    cfg = {
        "data": {
            "kind": "synth",
            "synth": {"frames_per_mode": 4, "frame_s": 5.0, "sample_rate_hz": 100.0,
                      "transition_fraction": 0.0, "seed": 13},
        },
        "target_hz": 20.0,
        "model": TINY_MODEL_YAML,
        "train": {"batch_size": 8, "max_epochs": 2, "lr": 1e-3, "split_ratio": 0.8},
        "output_dir": str(tmp_path / "out"),
        "seeds": [0],
    }
    for key, value in extra.items():
        cfg[key] = value
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestConfig:
    def test_defaults_are_headline_settings(self):
        cfg = RunConfig.load()
        assert cfg.target_hz() == 20.0
        assert cfg.raw["train"]["batch_size"] == 50
        assert cfg.raw["train"]["lr"] == 1e-4
        assert cfg.raw["train"]["l2"] == 0.001
        assert cfg.raw["model"]["pyramid_taps"] == [1, 2, 3, 5]
        assert cfg.feature_config().channel_names() == (
            "A_jerk", "A_mag", "M_jerk", "G_xyz", "G_mag",
        )

    def test_set_override_parsing(self):
        assert parse_set_override("train.lr=0.0002") == {"train": {"lr": 0.0002}}
        assert parse_set_override("seeds=[1,2]") == {"seeds": [1, 2]}
        with pytest.raises(ConfigError):
            parse_set_override("no_equals_sign")

    def test_layering_file_then_overrides(self, tmp_path):
        path = tiny_config(tmp_path)
        cfg = RunConfig.load(path, ["train.max_epochs=9", "target_hz=10"])
        assert cfg.raw["train"]["max_epochs"] == 9
        assert cfg.target_hz() == 10.0
        assert cfg.downsample_factor() == 10

    def test_non_integer_downsample_rejected(self, tmp_path):
        path = tiny_config(tmp_path)
        with pytest.raises(ConfigError, match="divide"):
            RunConfig.load(path, ["target_hz=30"])

    def test_shl_kind_requires_dir(self):
        with pytest.raises(ConfigError, match="shl_dir"):
            RunConfig.load(None, ["data.kind=shl"])


class TestPreprocessCache:
    def test_miss_then_hit(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        first = prepare_channels(cfg)
        assert not first.cache_hit
        second = prepare_channels(cfg)
        assert second.cache_hit
        for a, b in zip(first.channels.arrays, second.channels.arrays):
            assert np.array_equal(a, b)

    def test_changing_rate_changes_key(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        a = prepare_channels(cfg)
        cfg2 = RunConfig.load(tiny_config(tmp_path), ["target_hz=10"])
        b = prepare_channels(cfg2)
        assert a.cache_key != b.cache_key
        assert not b.cache_hit

    def test_collision_refused(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        prepared = prepare_channels(cfg)
        manifest = cfg.cache_dir() / f"{prepared.cache_key}.json"
        blob = json.loads(manifest.read_text())
        blob["window_s"] = 123.0
        manifest.write_text(json.dumps(blob))
        with pytest.raises(CacheCollisionError, match="purge|delete"):
            prepare_channels(cfg)


class TestCommands:
    def test_synth_writes_loadable_directory(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        data_dir = tmp_path / "data"
        assert main(["synth", "-c", str(cfg_path), "--data-dir", str(data_dir)]) == 0
        assert (data_dir / "Acc_x.txt").is_file()
        assert (data_dir / "Label.txt").is_file()

    def test_preprocess_reports_hits(self, tmp_path, capsys):
        cfg_path = tiny_config(tmp_path)
        assert main(["preprocess", "-c", str(cfg_path)]) == 0
        assert "cache miss" in capsys.readouterr().out
        assert main(["preprocess", "-c", str(cfg_path)]) == 0
        assert "cache hit" in capsys.readouterr().out

    def test_train_eval_predict_cycle(self, tmp_path, capsys):
        cfg_path = tiny_config(tmp_path)
        out_dir = tmp_path / "out"
        assert main(["train", "-c", str(cfg_path), "-q"]) == 0
        ckpt = out_dir / "model_seed0.ckpt"
        assert ckpt.is_file()
        assert (out_dir / "trainlog_seed0.csv").is_file()
        assert (out_dir / "config.resolved.yaml").is_file()
        assert (out_dir / "training_summary.csv").is_file()

        assert main(["eval", "-c", str(cfg_path), "--checkpoint", str(ckpt)]) == 0
        out = capsys.readouterr().out
        assert "confusion (frames)" in out and "confusion (samples)" in out
        assert (out_dir / "eval_frame.json").is_file()
        frame_blob = json.loads((out_dir / "eval_frame.json").read_text())
        assert 0.0 <= frame_blob["accuracy"] <= 100.0

        # predictions on an unlabeled copy of the data
        data_dir = tmp_path / "unlabeled"
        assert main(["synth", "-c", str(cfg_path), "--data-dir", str(data_dir)]) == 0
        (data_dir / "Label.txt").unlink()
        pred_csv = tmp_path / "preds.csv"
        assert (
            main(
                ["predict", "-c", str(cfg_path), "--checkpoint", str(ckpt),
                 "--data-dir", str(data_dir), "--out", str(pred_csv)]
            )
            == 0
        )
        with open(pred_csv) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 32
        assert all(1 <= int(r["mode_id"]) <= 8 for r in rows)

    def test_error_exits_nonzero(self, tmp_path, capsys):
        rc = main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_summarize_prints_counts(self, tmp_path, capsys):
        cfg_path = tiny_config(tmp_path)
        assert main(["summarize", "-c", str(cfg_path), "--input-len", "100"]) == 0
        out = capsys.readouterr().out
        assert "trainable parameters" in out
        assert "tap 5" in out

    def test_sweep_grid_with_invalid_pair(self, tmp_path, capsys):
        cfg_path = tiny_config(tmp_path)
        out_dir = tmp_path / "out"
        # 7 s does not divide the 5 s synthetic frames -> skipped with reason
        rc = main(
            ["sweep", "-c", str(cfg_path), "--windows", "5,7", "--rates", "20",
             "-o", str(out_dir)]
        )
        assert rc == 0
        with open(out_dir / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        ok = [r for r in rows if r["status"] == "ok"]
        skipped = [r for r in rows if r["status"].startswith("skipped")]
        assert {r["unit"] for r in ok} == {"frame", "sample"}
        assert len(skipped) == 1 and skipped[0]["window_s"] == "7.0"

    def test_empty_rate_list_fails(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        assert main(["sweep", "-c", str(cfg_path), "--windows", "5", "--rates", ""]) == 1


class TestAblationGrids:
    def test_conv_depth_grid_shape(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        rows = _ablation_grid(cfg, "conv_depth")
        assert len(rows) == 5
        assert rows[0][1]["num_conv_layers"] == 1
        assert rows[0][1]["pyramid_taps"] == [1]
        assert rows[4][1]["pyramid_taps"] == [1, 2, 3, 5]

    def test_pyramid_grid_includes_baseline_wiring(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        rows = _ablation_grid(cfg, "pyramid_taps")
        tap_sets = [tuple(r[1]["pyramid_taps"]) for r in rows]
        assert (5,) in tap_sets  # the single-tap baseline wiring
        assert (1, 2, 3, 4, 5) in tap_sets

    def test_features_grid_has_nine_single_rows(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        rows = _ablation_grid(cfg, "features")
        singles = rows[:9]
        assert len(rows) == 15
        for label, _, feats in singles:
            assert len(feats.channel_names()) == 1
            assert feats.channel_names()[0] == label
        # the last combination row is the default five-channel set
        assert rows[-1][2].channel_names() == ("A_jerk", "A_mag", "M_jerk", "G_xyz", "G_mag")

    def test_unknown_mode_rejected(self, tmp_path):
        cfg = RunConfig.load(tiny_config(tmp_path))
        with pytest.raises(ConfigError):
            _ablation_grid(cfg, "bogus")

    def test_ablate_conv_depth_end_to_end(self, tmp_path):
        cfg_path = tiny_config(tmp_path)
        out_dir = tmp_path / "out"
        rc = main(
            ["ablate", "-c", str(cfg_path), "--mode", "conv_depth",
             "--timing-reps", "5", "-o", str(out_dir),
             "--set", "train.max_epochs=1"]
        )
        assert rc == 0
        with open(out_dir / "ablate_conv_depth.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 5
        assert all(r["status"] == "ok" for r in rows)
        params = [int(r["params"]) for r in rows]
        assert params == sorted(params) and params[0] < params[-1]
