"""Desk-scale synthetic sensor data with per-mode motion signatures.

Each of the eight modes gets a distinguishable spectral signature
(oscillation frequency, amplitude, noise floor, magnetometer bias).
Train and Subway are deliberately near-identical, differing only in
noise floor, so a classifier should confuse mostly that pair. The
accelerometer magnitude ordering Run > Walk > Still holds by
construction. These semantics are fixture conventions, not physics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import MODE_NAMES, NUM_MODES, SENSORS, Dataset, RawFrame

GRAVITY = 9.81
# Fixed share of each oscillation routed to the x/y/z axes, per sensor.
ACC_AXIS_MIX = (0.60, 0.25, 1.00)
GYR_AXIS_MIX = (1.00, 0.55, 0.30)
MAG_AXIS_MIX = (0.50, 1.00, 0.35)


@dataclass(frozen=True)
class ModeSignature:
    """Generative parameters for one transportation mode."""

    osc_freq_hz: float
    acc_amp: float
    gyr_amp: float
    mag_amp: float
    acc_noise: float
    gyr_noise: float
    mag_noise: float
    mag_bias: tuple[float, float, float] = (22.0, 5.0, 43.0)


DEFAULT_SIGNATURES: dict[int, ModeSignature] = {
    1: ModeSignature(0.0, 0.0, 0.0, 0.0, 0.03, 0.01, 0.10),                      # Still
    2: ModeSignature(2.0, 1.2, 0.50, 0.30, 0.15, 0.05, 0.20),                    # Walk
    3: ModeSignature(3.0, 3.0, 0.90, 0.50, 0.30, 0.08, 0.25),                    # Run
    4: ModeSignature(1.2, 0.8, 1.30, 0.40, 0.20, 0.06, 0.20),                    # Bike
    5: ModeSignature(0.30, 0.35, 0.10, 0.60, 0.10, 0.02, 0.30, (30.0, 5.0, 43.0)),   # Car
    6: ModeSignature(0.22, 0.50, 0.12, 0.80, 0.12, 0.03, 0.35, (16.0, 5.0, 43.0)),   # Bus
    7: ModeSignature(0.15, 0.45, 0.06, 0.70, 0.090, 0.02, 0.30, (22.0, -8.0, 43.0)),   # Train
    8: ModeSignature(0.15, 0.45, 0.06, 0.70, 0.112, 0.02, 0.30, (22.0, -8.0, 43.0)),   # Subway
}


@dataclass(frozen=True)
class SynthSpec:
    """Shape and signature parameters for a generated dataset."""

    frames_per_mode: int = 50
    frame_s: float = 5.0
    sample_rate_hz: float = 100.0
    transition_fraction: float = 0.0
    signatures: dict[int, ModeSignature] = field(
        default_factory=lambda: dict(DEFAULT_SIGNATURES)
    )

    def __post_init__(self):
        if self.frames_per_mode <= 0:
            raise ValueError(f"frames_per_mode must be positive, got {self.frames_per_mode}")
        if self.frame_s <= 0 or self.sample_rate_hz <= 0:
            raise ValueError("frame_s and sample_rate_hz must be positive")
        if not 0.0 <= self.transition_fraction < 1.0:
            raise ValueError("transition_fraction must be in [0, 1)")
        missing = set(MODE_NAMES) - set(self.signatures)
        if missing:
            raise ValueError(f"signatures missing for modes {sorted(missing)}")

    @property
    def frame_length(self) -> int:
        return int(round(self.frame_s * self.sample_rate_hz))


def _mode_signals(
    sig: ModeSignature, t: np.ndarray, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Generate the three [T, 3] sensor tracks for one labeled segment."""
    freq = sig.osc_freq_hz * (1.0 + 0.03 * rng.standard_normal())
    phase = rng.uniform(0.0, 2.0 * np.pi)
    if sig.osc_freq_hz > 0.0:
        osc = (
            np.sin(2 * np.pi * freq * t + phase)
            + 0.35 * np.sin(2 * np.pi * 2 * freq * t + 1.7 * phase)
            + 0.15 * np.sin(2 * np.pi * 3 * freq * t + 2.3 * phase)
        )
    else:
        osc = np.zeros_like(t)

    out = {}
    acc = np.empty((t.size, 3))
    for k, mix in enumerate(ACC_AXIS_MIX):
        base = GRAVITY if k == 2 else 0.0
        acc[:, k] = base + sig.acc_amp * mix * osc + sig.acc_noise * rng.standard_normal(t.size)
    out["acc"] = acc

    gyr = np.empty((t.size, 3))
    for k, mix in enumerate(GYR_AXIS_MIX):
        gyr[:, k] = sig.gyr_amp * mix * osc + sig.gyr_noise * rng.standard_normal(t.size)
    out["gyr"] = gyr

    mag = np.empty((t.size, 3))
    for k, mix in enumerate(MAG_AXIS_MIX):
        mag[:, k] = (
            sig.mag_bias[k]
            + sig.mag_amp * mix * osc
            + sig.mag_noise * rng.standard_normal(t.size)
        )
    out["mag"] = mag
    return out


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Generate a labeled Dataset; bitwise deterministic for a fixed seed.

    Frames are emitted mode-major (all frames of mode 1, then mode 2, ...).
    When ``transition_fraction`` > 0, that share of each mode's frames
    switches to a random other mode partway through, with the switch point
    uniform in the middle 40 percent of the frame.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    length = spec.frame_length
    t = np.arange(length) / spec.sample_rate_hz

    frames = []
    for mode in sorted(MODE_NAMES):
        sig = spec.signatures[mode]
        for _ in range(spec.frames_per_mode):
            make_transition = rng.random() < spec.transition_fraction
            if make_transition:
                other = int(rng.integers(1, NUM_MODES + 1))
                while other == mode:
                    other = int(rng.integers(1, NUM_MODES + 1))
                switch = int(rng.integers(int(0.30 * length), int(0.70 * length) + 1))
                head = _mode_signals(sig, t[:switch], rng)
                tail = _mode_signals(spec.signatures[other], t[switch:], rng)
                samples = {s: np.concatenate([head[s], tail[s]], axis=0) for s in SENSORS}
                labels = np.concatenate(
                    [np.full(switch, mode), np.full(length - switch, other)]
                )
            else:
                samples = _mode_signals(sig, t, rng)
                labels = np.full(length, mode)
            frames.append(
                RawFrame(samples=samples, sample_rate_hz=spec.sample_rate_hz, labels=labels)
            )
    return Dataset(frames=frames, split_tag="train")
