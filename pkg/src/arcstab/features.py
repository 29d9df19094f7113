"""Per-window descriptors and the 10-dimensional feature vector.

Feature order is fixed::

    asi, thd_arc, h_s, p50_n, p100_n, her, rms, cf, k, zcr

Spectral descriptors read a :class:`~arcstab.tfr.PsdFrame`; the four
time-domain ones read the raw frame samples.  Windows whose fundamental (or
total) power falls below ``eps_rel`` times the total raise
:class:`DegenerateSpectrum` instead of producing silent zeros.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from .signal import DEFAULT_HOP, DEFAULT_WINDOW, Frame, SignalTrace, segment, segment_phases
from .tfr import (DEFAULT_NFFT, PsdFrame, band_bins, band_energy, hann_window, peak_power_at,
                  peak_powers_at, psd_frame)

__all__ = [
    "DegenerateSpectrum",
    "FeatureVector",
    "FEATURE_NAMES",
    "TimeFeatures",
    "PipelineConfig",
    "DescriptorSeries",
    "asi",
    "thd_arc",
    "spectral_entropy",
    "her",
    "spd",
    "time_features",
    "feature_vector",
    "entropy_rate",
    "descriptor_series",
    "extract",
]


class DegenerateSpectrum(ValueError):
    """The window carries (almost) no power where a descriptor needs it."""


@dataclass(frozen=True)
class FeatureVector:
    asi: float
    thd_arc: float
    h_s: float
    p50_n: float
    p100_n: float
    her: float
    rms: float
    cf: float
    k: float
    zcr: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*(float(v) for v in values))


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))


@dataclass(frozen=True)
class PipelineConfig:
    """Window, transform and band settings shared by extraction and monitoring."""

    window_len: int = DEFAULT_WINDOW
    hop: int = DEFAULT_HOP
    nfft: int = DEFAULT_NFFT
    fundamental_hz: float = 50.0
    band_halfwidth_hz: float = 5.0
    her_halfwidth_hz: float = 5.0
    thd_n_max: int | None = None
    eps_rel: float = 1e-12

    def __post_init__(self):
        if self.window_len < 2 or self.hop < 1:
            raise ValueError("window_len must be >= 2 and hop >= 1")
        if self.nfft < self.window_len or self.nfft & (self.nfft - 1):
            raise ValueError("nfft must be a power of two >= window_len")
        if self.eps_rel <= 0:
            raise ValueError("eps_rel must be > 0")

    @property
    def band(self) -> tuple[float, float]:
        f0, hw = self.fundamental_hz, self.band_halfwidth_hz
        return f0 - hw, f0 + hw


def _floor(psd: PsdFrame, eps_rel: float) -> float:
    total = psd.total_power
    if not total > 0:
        raise DegenerateSpectrum("zero total power")
    return eps_rel * total


def asi(psd: PsdFrame, fundamental_hz: float = 50.0, halfwidth_hz: float = 5.0,
        eps_rel: float = 1e-12) -> float:
    """Arc stability index.

    Energy in ``f0 +/- halfwidth`` divided by the peak-bin power near ``f0``
    times the bin width, which makes the ratio dimensionless: it is 1 when
    the band holds a single nonzero bin and grows as energy spreads into
    neighbouring bins.
    """
    floor = _floor(psd, eps_rel)
    peak, _ = peak_power_at(psd, fundamental_hz)
    denom = peak * psd.bin_hz
    if denom <= floor:
        raise DegenerateSpectrum(f"no power at {fundamental_hz} Hz")
    return band_energy(psd, fundamental_hz - halfwidth_hz, fundamental_hz + halfwidth_hz) / denom


def _harmonic_limit(psd: PsdFrame, f0: float, n_max: int | None) -> int:
    top = int(math.floor(psd.nyquist / f0 * (1 + 1e-12)))
    if n_max is None:
        # default: every harmonic strictly below Nyquist
        if math.isclose(top * f0, psd.nyquist):
            top -= 1
        return top
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    return min(n_max, top)


def thd_arc(psd: PsdFrame, fundamental_hz: float = 50.0, n_max: int | None = None,
            eps_rel: float = 1e-12) -> float:
    """Harmonic distortion ``sqrt(sum_{n>=2} P(n f0) / P(f0))``.

    ``P`` is the peak-bin power of :func:`~arcstab.tfr.peak_power_at`.  The
    square root covers the ratio of powers, so the result is an amplitude ratio
    and independent of signal scale.
    """
    floor = _floor(psd, eps_rel)
    fund, _ = peak_power_at(psd, fundamental_hz)
    if fund * psd.bin_hz <= floor:
        raise DegenerateSpectrum(f"no power at {fundamental_hz} Hz")
    top = _harmonic_limit(psd, fundamental_hz, n_max)
    harmonics = float(np.sum(peak_powers_at(psd, fundamental_hz * np.arange(2, top + 1))))
    return math.sqrt(harmonics / fund)


def spectral_entropy(psd: PsdFrame) -> float:
    """Shannon entropy (nats) of the PSD normalised to unit sum; ``0 ln 0 = 0``."""
    total = float(np.sum(psd.power))
    if not total > 0:
        raise DegenerateSpectrum("zero total power")
    p = psd.power[psd.power > 0] / total
    return float(-np.sum(p * np.log(p)))


def her(psd: PsdFrame, epsilon_hz: float = 5.0, fundamental_hz: float = 50.0,
        eps_rel: float = 1e-12) -> float:
    """Harmonic energy ratio: band energy at ``2 f0`` over band energy at ``f0``."""
    floor = _floor(psd, eps_rel)
    f0 = fundamental_hz
    fund = band_energy(psd, f0 - epsilon_hz, f0 + epsilon_hz)
    if fund <= floor:
        raise DegenerateSpectrum(f"no energy around {f0} Hz")
    return band_energy(psd, 2 * f0 - epsilon_hz, 2 * f0 + epsilon_hz) / fund


def spd(psd: PsdFrame, band: tuple[float, float] = (45.0, 55.0)) -> float:
    """Sideband power deviation: population variance of the PSD bins in ``band``.

    Not part of the feature vector; exported alongside it.
    """
    values = band_bins(psd, *band)
    if len(values) < 2:
        raise ValueError(f"band {band} holds fewer than two bins")
    return float(np.var(values))


@dataclass(frozen=True)
class TimeFeatures:
    rms: float
    cf: float
    k: float
    zcr: float
    cf_degenerate: bool = False
    k_degenerate: bool = False


def time_features(frame: Frame | np.ndarray) -> TimeFeatures:
    """RMS, crest factor, Pearson kurtosis and zero-crossing fraction.

    Kurtosis is the non-excess ``m4 / m2**2`` of central moments (1.5 for a
    sinusoid, 3 for Gaussian noise).  The zero-crossing fraction counts strict
    sign changes between neighbours over ``L - 1`` pairs.  A constant frame
    has no defined crest factor or kurtosis; both are returned as 0 with their
    flags set.
    """
    x = np.asarray(frame.samples if isinstance(frame, Frame) else frame, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("frame needs at least two samples")
    rms = float(np.sqrt(np.mean(x * x)))
    zcr = float(np.count_nonzero(x[:-1] * x[1:] < 0) / (len(x) - 1))
    if np.ptp(x) == 0:
        return TimeFeatures(rms, 0.0, 0.0, zcr, cf_degenerate=True, k_degenerate=True)
    centred = x - np.mean(x)
    m2 = np.mean(centred**2)
    m4 = np.mean(centred**4)
    return TimeFeatures(rms, float(np.max(np.abs(x)) / rms), float(m4 / (m2 * m2)), zcr)


def feature_vector(frame: Frame | np.ndarray, psd: PsdFrame,
                   config: PipelineConfig | None = None) -> FeatureVector:
    """Assemble the ten descriptors of one window."""
    cfg = config or PipelineConfig()
    f0 = cfg.fundamental_hz
    total = psd.total_power
    if not total > 0:
        raise DegenerateSpectrum("zero total power")
    tf = time_features(frame)
    hw = cfg.band_halfwidth_hz
    return FeatureVector(
        asi=asi(psd, f0, hw, cfg.eps_rel),
        thd_arc=thd_arc(psd, f0, cfg.thd_n_max, cfg.eps_rel),
        h_s=spectral_entropy(psd),
        p50_n=band_energy(psd, f0 - hw, f0 + hw) / total,
        p100_n=band_energy(psd, 2 * f0 - hw, 2 * f0 + hw) / total,
        her=her(psd, cfg.her_halfwidth_hz, f0, cfg.eps_rel),
        rms=tf.rms,
        cf=tf.cf,
        k=tf.k,
        zcr=tf.zcr,
    )


@dataclass(frozen=True)
class DescriptorSeries:
    times: np.ndarray
    asi: np.ndarray
    thd_arc: np.ndarray
    h_s: np.ndarray
    hop_s: float

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.asi) == len(self.thd_arc) == len(self.h_s) == n):
            raise ValueError("descriptor arrays must have equal lengths")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("frame times must be strictly increasing")

    @property
    def dh_s_dt(self) -> np.ndarray:
        return entropy_rate(self)


def entropy_rate(series: DescriptorSeries) -> np.ndarray:
    """Forward difference of spectral entropy per second, ``len = frames - 1``."""
    h = np.asarray(series.h_s, dtype=np.float64)
    if len(h) < 2:
        raise ValueError("entropy rate needs at least two frames")
    return np.diff(h) / series.hop_s


def descriptor_series(trace: SignalTrace, config: PipelineConfig | None = None) -> DescriptorSeries:
    """Track ASI, THD and spectral entropy frame by frame over ``trace``."""
    cfg = config or PipelineConfig()
    window = hann_window(cfg.window_len)
    rows = []
    for frame in segment(trace, cfg.window_len, cfg.hop):
        psd = psd_frame(frame, window, cfg.nfft, trace.sample_rate)
        rows.append((psd.frame_time_s, asi(psd, cfg.fundamental_hz, cfg.band_halfwidth_hz, cfg.eps_rel),
                     thd_arc(psd, cfg.fundamental_hz, cfg.thd_n_max, cfg.eps_rel),
                     spectral_entropy(psd)))
    t, a, th, h = (np.array(col) for col in zip(*rows))
    return DescriptorSeries(t, a, th, h, cfg.hop / trace.sample_rate)


def extract(trace: SignalTrace, config: PipelineConfig | None = None):
    """Feature vector of every window (phases segmented separately).

    Returns
    -------
    list of (Frame, FeatureVector)
    """
    cfg = config or PipelineConfig()
    window = hann_window(cfg.window_len)
    out = []
    for frame in segment_phases(trace, cfg.window_len, cfg.hop):
        psd = psd_frame(frame, window, cfg.nfft, trace.sample_rate)
        out.append((frame, feature_vector(frame, psd, cfg)))
    return out
