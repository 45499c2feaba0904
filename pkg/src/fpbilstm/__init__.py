"""Transportation-mode detection from smartphone IMU streams.

Raw accelerometer/gyroscope/magnetometer frames go through a small DSP
pipeline (smoothing, block-mean downsampling, magnitude, jerk) into a
pyramid-tapped CNN + biLSTM classifier over eight modes, trained with a
built-in autodiff engine. See the README for the CLI and the acceptance
suite.
"""

from .dsp import FeatureConfig, build_channels
from .ingest import Dataset, RawFrame, load_shl, majority_label, reframe, transition_ratio
from .metrics import confusion, per_frame_report, per_sample_report, report_from_confusion
from .model import FPBiLSTM, ModelConfig, ModelSummary, predict, summarize
from .synth import SynthSpec, synth_generate
from .train import TrainConfig, TrainLog, fit, stratified_split

__version__ = "0.1.0"

__all__ = [
    "FeatureConfig",
    "build_channels",
    "Dataset",
    "RawFrame",
    "load_shl",
    "majority_label",
    "reframe",
    "transition_ratio",
    "confusion",
    "per_frame_report",
    "per_sample_report",
    "report_from_confusion",
    "FPBiLSTM",
    "ModelConfig",
    "ModelSummary",
    "predict",
    "summarize",
    "SynthSpec",
    "synth_generate",
    "TrainConfig",
    "TrainLog",
    "fit",
    "stratified_split",
    "__version__",
]
