import numpy as np
import pytest

from fpbilstm.ingest import majority_label
from fpbilstm.synth import DEFAULT_SIGNATURES, ModeSignature, SynthSpec, synth_generate


class TestSynthGenerate:
    def test_same_seed_bitwise_identical(self):
        spec = SynthSpec(frames_per_mode=3, frame_s=1.0)
        a = synth_generate(spec, seed=11)
        b = synth_generate(spec, seed=11)
        for fa, fb in zip(a.frames, b.frames):
            for s in ("acc", "gyr", "mag"):
                assert np.array_equal(fa.samples[s], fb.samples[s])
            assert np.array_equal(fa.labels, fb.labels)

    def test_different_seeds_differ(self):
        spec = SynthSpec(frames_per_mode=2, frame_s=1.0)
        a = synth_generate(spec, seed=1)
        b = synth_generate(spec, seed=2)
        assert not np.array_equal(a.frames[0].samples["acc"], b.frames[0].samples["acc"])

    def test_counts_and_balance(self):
        ds = synth_generate(SynthSpec(frames_per_mode=50, frame_s=1.0), seed=0)
        assert len(ds) == 400
        labels = ds.frame_labels()
        counts = np.bincount(labels, minlength=9)[1:]
        assert counts.tolist() == [50] * 8

    def test_frame_geometry(self):
        ds = synth_generate(SynthSpec(frames_per_mode=2, frame_s=5.0, sample_rate_hz=100.0), seed=0)
        assert ds.frame_length == 500
        assert ds.sample_rate_hz == 100.0

    def test_transition_injection(self):
        spec = SynthSpec(frames_per_mode=20, frame_s=2.0, transition_fraction=0.5)
        ds = synth_generate(spec, seed=5)
        mixed = [f for f in ds.frames if np.unique(f.labels).size > 1]
        assert 40 <= len(mixed) <= 120  # ~50% of 160, generously bounded
        for frame in mixed:
            switch = np.flatnonzero(np.diff(frame.labels))[0] + 1
            assert 0.30 * len(frame.labels) <= switch <= 0.70 * len(frame.labels) + 1
            majority_label(frame.labels)  # labels stay within 1..8

    def test_zero_transition_fraction_is_pure(self):
        ds = synth_generate(SynthSpec(frames_per_mode=10, frame_s=1.0), seed=2)
        assert all(np.unique(f.labels).size == 1 for f in ds.frames)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"frames_per_mode": 0},
            {"frame_s": -1.0},
            {"sample_rate_hz": 0.0},
            {"transition_fraction": 1.0},
        ],
    )
    def test_invalid_spec_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SynthSpec(**kwargs)

    def test_missing_signature_rejected(self):
        sigs = dict(DEFAULT_SIGNATURES)
        del sigs[8]
        with pytest.raises(ValueError, match="8"):
            SynthSpec(signatures=sigs)

    def test_train_subway_differ_only_in_noise(self):
        train, subway = DEFAULT_SIGNATURES[7], DEFAULT_SIGNATURES[8]
        assert train.osc_freq_hz == subway.osc_freq_hz
        assert train.acc_amp == subway.acc_amp
        assert train.mag_bias == subway.mag_bias
        assert train.acc_noise != subway.acc_noise

    def test_signature_override(self):
        sigs = dict(DEFAULT_SIGNATURES)
        sigs[1] = ModeSignature(0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5)
        ds = synth_generate(SynthSpec(frames_per_mode=1, frame_s=1.0, signatures=sigs), seed=0)
        still = ds.frames[0].samples["acc"]
        assert still[:, 0].std() > 0.2  # the louder noise floor shows up
