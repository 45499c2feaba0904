import numpy as np
import pytest

from fpbilstm.errors import ParseError, StructuralError
from fpbilstm.ingest import (
    DEFAULT_FILE_NAMES,
    MODE_IDS,
    MODE_NAMES,
    Dataset,
    RawFrame,
    load_shl,
    majority_label,
    reframe,
    transition_ratio,
    write_shl,
)


def make_dataset(rng, n_frames=4, length=12, rate=2.0, labels=None):
    frames = []
    for i in range(n_frames):
        lab = np.full(length, (i % 8) + 1) if labels is None else labels[i]
        frames.append(
            RawFrame(
                samples={s: rng.standard_normal((length, 3)) for s in ("acc", "gyr", "mag")},
                sample_rate_hz=rate,
                labels=lab,
            )
        )
    return Dataset(frames)


class TestModeTable:
    def test_bijection(self):
        assert sorted(MODE_NAMES) == list(range(1, 9))
        assert [MODE_NAMES[k] for k in range(1, 9)] == [
            "Still", "Walk", "Run", "Bike", "Car", "Bus", "Train", "Subway",
        ]
        assert all(MODE_IDS[name] == k for k, name in MODE_NAMES.items())


class TestLoadWrite:
    def test_roundtrip_is_exact(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=3, length=12)
        write_shl(ds, tmp_path)
        back = load_shl(tmp_path, sample_rate_hz=2.0)
        assert len(back) == 3
        assert back.frame_length == 12
        for a, b in zip(ds.frames, back.frames):
            for s in ("acc", "gyr", "mag"):
                assert np.array_equal(a.samples[s], b.samples[s])
            assert np.array_equal(a.labels, b.labels)

    def test_fixture_geometry(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=3, length=12, rate=2.0)
        write_shl(ds, tmp_path)
        back = load_shl(tmp_path, sample_rate_hz=2.0)
        assert len(back) == 3 and back.frame_length == 12
        assert back.sample_rate_hz == 2.0

    def test_empty_directory_is_structural_error(self, tmp_path):
        with pytest.raises(StructuralError):
            load_shl(tmp_path)

    def test_mismatched_line_counts_names_file(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=3, length=10)
        write_shl(ds, tmp_path)
        bad = tmp_path / "Gyr_y.txt"
        lines = bad.read_text().strip().splitlines()
        bad.write_text("\n".join(lines[:2]) + "\n")
        with pytest.raises(StructuralError, match="Gyr_y.txt"):
            load_shl(tmp_path, sample_rate_hz=2.0)

    def test_ragged_line_names_file_and_line(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=3, length=10)
        write_shl(ds, tmp_path)
        bad = tmp_path / "Acc_z.txt"
        lines = bad.read_text().strip().splitlines()
        lines[1] = " ".join(lines[1].split()[:-1])
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(StructuralError, match=r"Acc_z.txt:2"):
            load_shl(tmp_path, sample_rate_hz=2.0)

    def test_non_numeric_token_is_parse_error_with_location(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=2, length=6)
        write_shl(ds, tmp_path)
        bad = tmp_path / "Mag_x.txt"
        lines = bad.read_text().strip().splitlines()
        tokens = lines[1].split()
        tokens[3] = "bogus"
        lines[1] = " ".join(tokens)
        bad.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match=r"Mag_x.txt:2: column 4"):
            load_shl(tmp_path, sample_rate_hz=2.0)

    def test_out_of_range_label_rejected(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=2, length=6)
        write_shl(ds, tmp_path)
        label_file = tmp_path / "Label.txt"
        lines = label_file.read_text().strip().splitlines()
        lines[0] = lines[0].replace("1", "9", 1)
        label_file.write_text("\n".join(lines) + "\n")
        with pytest.raises(StructuralError, match="label out of range"):
            load_shl(tmp_path, sample_rate_hz=2.0)

    def test_missing_labels_required_vs_optional(self, rng, tmp_path):
        ds = make_dataset(rng, n_frames=2, length=6)
        write_shl(ds, tmp_path)
        (tmp_path / "Label.txt").unlink()
        with pytest.raises(StructuralError, match="Label.txt"):
            load_shl(tmp_path, sample_rate_hz=2.0)
        back = load_shl(tmp_path, sample_rate_hz=2.0, require_labels=False)
        assert all(f.labels is None for f in back.frames)

    def test_manifest_overrides_names(self, rng, tmp_path):
        manifest = {key: f"s_{key[0]}_{key[1]}.txt" for key in DEFAULT_FILE_NAMES}
        manifest["label"] = "ground_truth.txt"
        ds = make_dataset(rng, n_frames=2, length=6)
        write_shl(ds, tmp_path, manifest=manifest)
        assert (tmp_path / "s_acc_x.txt").is_file()
        back = load_shl(tmp_path, sample_rate_hz=2.0, manifest=manifest)
        assert len(back) == 2


class TestReframe:
    def test_exact_halving(self, rng):
        ds = make_dataset(rng, n_frames=5, length=12, rate=2.0)  # 6 s frames
        out = reframe(ds, 3.0)
        assert len(out) == 10
        assert out.frame_length == 6

    def test_five_second_windows(self, rng):
        ds = make_dataset(rng, n_frames=1, length=6000, rate=100.0)  # one 60 s frame
        out = reframe(ds, 5.0)
        assert len(out) == 12
        assert out.frame_length == 500

    def test_non_divisor_lists_valid_windows(self, rng):
        ds = make_dataset(rng, n_frames=1, length=6000, rate=100.0)
        with pytest.raises(StructuralError) as err:
            reframe(ds, 7.0)
        message = str(err.value)
        for token in ("30", "20", "15", "12", "10"):
            assert token in message

    def test_label_concat_roundtrip(self, rng):
        labels = [np.concatenate([np.full(6, 2), np.full(6, 5)]) for _ in range(3)]
        ds = make_dataset(rng, n_frames=3, length=12, labels=labels)
        out = reframe(ds, 2.0)  # 4 samples per sub-frame at 2 Hz
        rejoined = np.concatenate([f.labels for f in out.frames]).reshape(3, 12)
        for i in range(3):
            assert np.array_equal(rejoined[i], labels[i])

    def test_order_preserved(self, rng):
        ds = make_dataset(rng, n_frames=2, length=8, rate=2.0)
        out = reframe(ds, 2.0)
        first = ds.frames[0].samples["acc"]
        assert np.array_equal(out.frames[0].samples["acc"], first[:4])
        assert np.array_equal(out.frames[1].samples["acc"], first[4:])


class TestMajorityLabel:
    def test_unanimous(self):
        assert majority_label([3, 3, 3]) == 3

    def test_count_comparison(self):
        assert majority_label([1, 1, 2, 2, 2]) == 2

    def test_tie_smallest_id(self):
        assert majority_label([1, 1, 2, 2]) == 1
        assert majority_label([8, 8, 5, 5, 2, 2]) == 2

    def test_order_independence(self, rng):
        for _ in range(50):
            seq = rng.integers(1, 9, size=int(rng.integers(1, 40)))
            assert majority_label(seq) == majority_label(seq[::-1])
            assert majority_label(seq) == majority_label(rng.permutation(seq))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            majority_label([])
        with pytest.raises(ValueError):
            majority_label(None)


class TestTransitionRatio:
    def test_all_single_mode(self, rng):
        ds = make_dataset(rng, n_frames=6, length=10)
        assert transition_ratio(ds) == 0.0

    def test_one_mixed_of_four(self, rng):
        labels = [np.full(8, 1), np.full(8, 2), np.full(8, 3),
                  np.concatenate([np.full(5, 4), np.full(3, 5)])]
        ds = make_dataset(rng, n_frames=4, length=8, labels=labels)
        assert transition_ratio(ds) == pytest.approx(25.0)

    def test_shuffle_invariance(self, rng):
        labels = [np.full(8, 1), np.concatenate([np.full(4, 2), np.full(4, 3)]),
                  np.full(8, 4), np.full(8, 5)]
        ds = make_dataset(rng, n_frames=4, length=8, labels=labels)
        base = transition_ratio(ds)
        for _ in range(5):
            order = rng.permutation(4)
            shuffled = Dataset([ds.frames[i] for i in order])
            assert transition_ratio(shuffled) == base


class TestRawFrameValidation:
    def test_axis_length_mismatch(self, rng):
        samples = {s: rng.standard_normal((10, 3)) for s in ("acc", "gyr")}
        samples["mag"] = rng.standard_normal((9, 3))
        with pytest.raises(StructuralError):
            RawFrame(samples=samples, sample_rate_hz=100.0)

    def test_label_length_mismatch(self, rng):
        samples = {s: rng.standard_normal((10, 3)) for s in ("acc", "gyr", "mag")}
        with pytest.raises(StructuralError):
            RawFrame(samples=samples, sample_rate_hz=100.0, labels=np.full(9, 1))

    def test_dataset_rejects_mixed_lengths(self, rng):
        f1 = RawFrame(
            samples={s: rng.standard_normal((10, 3)) for s in ("acc", "gyr", "mag")},
            sample_rate_hz=100.0,
        )
        f2 = RawFrame(
            samples={s: rng.standard_normal((12, 3)) for s in ("acc", "gyr", "mag")},
            sample_rate_hz=100.0,
        )
        with pytest.raises(StructuralError):
            Dataset([f1, f2])
