"""Short-time spectral analysis: Hann window, zero-padded DFT, one-sided PSD.

PSD convention (Welch): bin ``k`` of a frame ``x`` windowed by ``w`` is::

    P[k] = c_k * |DFT_nfft(x * w)[k]|**2 / (fs * sum(w**2))

with ``c_k = 2`` except at DC and Nyquist.  Then ``sum(P) * df`` equals the
window-weighted mean power ``sum((x*w)**2) / sum(w**2)``, and every band
integral is in A**2.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .signal import DEFAULT_HOP, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW, Frame, SignalTrace, segment

__all__ = [
    "WindowWeights",
    "PsdFrame",
    "hann_window",
    "psd_frame",
    "band_energy",
    "peak_power_at",
    "peak_powers_at",
    "windowed_mean_power",
    "band_bins",
    "spectrogram",
    "export_spectrogram",
    "DEFAULT_NFFT",
]

DEFAULT_NFFT = 4096

# relative slack when deciding whether a bin centre sits on a band edge
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class WindowWeights:
    weights: np.ndarray
    coherent_gain: float
    energy_gain: float

    def __len__(self) -> int:
        return len(self.weights)


@functools.lru_cache(maxsize=32)
def hann_window(length: int) -> WindowWeights:
    """Symmetric Hann window ``0.5 * (1 - cos(2 pi n / (L - 1)))``.

    The returned weights are read-only and cached, so one instance can be
    shared between threads.  ``coherent_gain`` is ``sum(w) / L`` and
    ``energy_gain`` is ``sum(w**2)``.
    """
    if int(length) != length or length < 2:
        raise ValueError(f"Hann window length must be an integer >= 2, got {length!r}")
    n = np.arange(length)
    w = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))
    w.setflags(write=False)
    return WindowWeights(w, float(np.sum(w) / length), float(np.sum(w * w)))


@dataclass(frozen=True)
class PsdFrame:
    """One-sided PSD of a single frame.

    Attributes
    ----------
    power : ndarray
        ``nfft // 2 + 1`` nonnegative values in A**2/Hz.
    bin_hz : float
        Frequency spacing ``fs / nfft``.
    frame_time_s : float
        Time of the window centre.
    """

    power: np.ndarray
    bin_hz: float
    frame_time_s: float = 0.0

    @property
    def nfft(self) -> int:
        return 2 * (len(self.power) - 1)

    @property
    def sample_rate(self) -> float:
        return self.bin_hz * self.nfft

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(len(self.power)) * self.bin_hz

    @property
    def total_power(self) -> float:
        """``sum(P) * df`` over the whole one-sided band."""
        return float(np.sum(self.power) * self.bin_hz)


def _as_samples(frame) -> tuple[np.ndarray, int]:
    if isinstance(frame, Frame):
        return np.asarray(frame.samples, dtype=np.float64), frame.start_index
    return np.asarray(frame, dtype=np.float64), 0


def psd_frame(frame: Frame | np.ndarray, window: WindowWeights | None = None,
              nfft: int = DEFAULT_NFFT, sample_rate: float = DEFAULT_SAMPLE_RATE) -> PsdFrame:
    """Windowed, zero-padded one-sided PSD of one frame.

    Parameters
    ----------
    frame : Frame or array_like
        Samples to analyse; a bare array is treated as starting at sample 0.
    window : WindowWeights, optional
        Defaults to a Hann window of the frame's length.
    nfft : int
        Transform length, a power of two no shorter than the frame.
    sample_rate : float
        Sampling frequency in Hz.
    """
    x, start = _as_samples(frame)
    L = len(x)
    if window is None:
        window = hann_window(L)
    if len(window) != L:
        raise ValueError(f"window length {len(window)} does not match frame length {L}")
    if nfft < L:
        raise ValueError(f"nfft={nfft} is shorter than the frame ({L} samples)")
    if nfft & (nfft - 1):
        raise ValueError(f"nfft={nfft} is not a power of two")
    if not np.all(np.isfinite(x)):
        raise ValueError("frame contains non-finite samples")

    fx = np.fft.rfft(x * window.weights, nfft)
    power = (fx.real**2 + fx.imag**2) / (sample_rate * window.energy_gain)
    power[1:-1] *= 2.0
    centre = (start + (L - 1) / 2) / sample_rate
    return PsdFrame(power, sample_rate / nfft, centre)


def windowed_mean_power(samples: np.ndarray, window: WindowWeights | None = None) -> float:
    """``sum((x*w)**2) / sum(w**2)``, the quantity a PSD integrates to."""
    x = np.asarray(samples, dtype=np.float64)
    if window is None:
        window = hann_window(len(x))
    return float(np.sum((x * window.weights) ** 2) / window.energy_gain)


def _bin_range(psd: PsdFrame, f1: float, f2: float) -> tuple[int, int]:
    lo = int(np.ceil(f1 / psd.bin_hz - _EDGE_TOL))
    hi = int(np.floor(f2 / psd.bin_hz + _EDGE_TOL))
    return max(lo, 0), min(hi, len(psd.power) - 1)


def band_energy(psd: PsdFrame, f1: float, f2: float) -> float:
    """Energy (A**2) in bins whose centre lies in ``[f1, f2]``."""
    if not 0 <= f1 < f2:
        raise ValueError(f"band must satisfy 0 <= f1 < f2, got [{f1}, {f2}]")
    if f2 > psd.nyquist * (1 + _EDGE_TOL):
        raise ValueError(f"band edge {f2} Hz exceeds Nyquist ({psd.nyquist} Hz)")
    lo, hi = _bin_range(psd, f1, f2)
    if hi < lo:
        return 0.0
    return float(np.sum(psd.power[lo:hi + 1]) * psd.bin_hz)


def band_bins(psd: PsdFrame, f1: float, f2: float) -> np.ndarray:
    """PSD values of the bins with centres in ``[f1, f2]``."""
    lo, hi = _bin_range(psd, f1, f2)
    return psd.power[lo:hi + 1]


def peak_power_at(psd: PsdFrame, f0: float) -> tuple[float, int]:
    """Largest PSD value among bins within ``f0 +/- df``.

    Returns ``(power, bin_index)``; ties go to the lower bin.  Off-grid
    frequencies have two candidates, bin-aligned ones three.
    """
    if not 0 <= f0 <= psd.nyquist * (1 + _EDGE_TOL):
        raise ValueError(f"f0={f0} Hz outside [0, {psd.nyquist}]")
    lo, hi = _bin_range(psd, f0 - psd.bin_hz, f0 + psd.bin_hz)
    candidates = psd.power[lo:hi + 1]
    k = int(np.argmax(candidates))
    return float(candidates[k]), lo + k


def peak_powers_at(psd: PsdFrame, freqs) -> np.ndarray:
    """Vectorised :func:`peak_power_at` returning only the powers."""
    f = np.asarray(freqs, dtype=np.float64)
    if np.any(f < 0) or np.any(f > psd.nyquist * (1 + _EDGE_TOL)):
        raise ValueError(f"frequencies outside [0, {psd.nyquist}]")
    last = len(psd.power) - 1
    lo = np.maximum(np.ceil((f - psd.bin_hz) / psd.bin_hz - _EDGE_TOL).astype(int), 0)
    hi = np.minimum(np.floor((f + psd.bin_hz) / psd.bin_hz + _EDGE_TOL).astype(int), last)
    idx = lo[:, None] + np.arange(3)[None, :]
    vals = np.where(idx <= hi[:, None], psd.power[np.minimum(idx, last)], -np.inf)
    return vals.max(axis=1)


def spectrogram(trace: SignalTrace, window_len: int = DEFAULT_WINDOW, hop: int = DEFAULT_HOP,
                nfft: int = DEFAULT_NFFT) -> list[PsdFrame]:
    """PSD of every frame of ``trace`` (see :func:`segment`)."""
    window = hann_window(window_len)
    return [psd_frame(f, window, nfft, trace.sample_rate) for f in segment(trace, window_len, hop)]


def export_spectrogram(frames: Sequence[PsdFrame], path: str | Path, hop_s: float) -> tuple[Path, Path]:
    """Write a frames x bins CSV matrix and a JSON sidecar for plotting.

    The sidecar records ``bin_hz``, ``hop_s``, ``nfft`` and the frame times.
    """
    if not frames:
        raise ValueError("no frames to export")
    path = Path(path)
    matrix = np.vstack([f.power for f in frames])
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({
        "bin_hz": frames[0].bin_hz,
        "hop_s": hop_s,
        "nfft": frames[0].nfft,
        "n_frames": len(frames),
        "n_bins": matrix.shape[1],
        "frame_times_s": [f.frame_time_s for f in frames],
    }, indent=2) + "\n")
    return path, sidecar
