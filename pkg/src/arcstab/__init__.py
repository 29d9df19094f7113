"""Arc regime classification from welding-current waveforms.

Short-time spectra of the current feed ten per-window descriptors (arc
stability index, harmonic distortion, spectral entropy, band ratios and
time-domain shape statistics), which train a classifier separating the
Transient, Stable and Extinction regimes.  A streaming monitor applies the
trained model hop by hop and raises early warnings.

Submodules
----------
signal      synthetic traces, windowing, trace I/O
tfr         windowed FFT power spectra and band queries
features    descriptors and the feature vector
classify    SVM (SMO), k-NN, CART and bagged trees
evaluation  splits, cross-validation, curves, intervals, importance
monitor     chunked streaming classifier with warnings
cli         ``arcstab`` command line
"""

__version__ = "0.1.0"

from .classify import Dataset, Hyperparams, ModelKind, TrainedModel, train
from .features import FEATURE_NAMES, FeatureVector, PipelineConfig, extract, feature_vector
from .signal import (CLASS_ORDER, RegimeLabel, RegimeParams, SignalTrace, default_phase_params,
                     generate_phase, load_trace, segment, synthesize_dataset_trace)
from .tfr import PsdFrame, psd_frame

__all__ = [
    "CLASS_ORDER",
    "Dataset",
    "FEATURE_NAMES",
    "FeatureVector",
    "Hyperparams",
    "ModelKind",
    "PipelineConfig",
    "PsdFrame",
    "RegimeLabel",
    "RegimeParams",
    "SignalTrace",
    "TrainedModel",
    "default_phase_params",
    "extract",
    "feature_vector",
    "generate_phase",
    "load_trace",
    "psd_frame",
    "segment",
    "synthesize_dataset_trace",
    "train",
]
