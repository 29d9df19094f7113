"""Welding-current traces: synthesis, file I/O and windowing.

Synthetic traces stand in for measured primary current.  Each regime is built
from a mains-frequency carrier plus a second harmonic and white noise:

* ``Stable``     carrier + harmonic + noise
* ``Transient``  stable base plus raised-cosine bursts of band-limited noise
* ``Extinction`` stable base under double-sideband AM whose depth grows as
  ``m0 * exp(lambda * t)`` (clamped at 1), which parks energy at
  ``f0 +/- f_mod``

All randomness comes from numpy's Philox counter-based bit generator keyed by
an explicit integer seed, so a (regime, params, seed) triple always yields the
same samples.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RegimeLabel",
    "RegimeParams",
    "SignalTrace",
    "Frame",
    "PhaseSpan",
    "TraceFormatError",
    "EmptyInputError",
    "make_rng",
    "generate_phase",
    "synthesize_dataset_trace",
    "default_phase_params",
    "load_trace",
    "write_trace",
    "segment",
    "segment_phases",
    "frame_count",
    "labels_path",
    "write_wav",
    "CLASS_ORDER",
    "DEFAULT_SAMPLE_RATE",
    "DEFAULT_WINDOW",
    "DEFAULT_HOP",
]

DEFAULT_SAMPLE_RATE = 10_000.0
DEFAULT_WINDOW = 200
DEFAULT_HOP = 16
WINDOWS_PER_PHASE = 49


class TraceFormatError(ValueError):
    """A trace file could not be parsed or is not uniformly sampled."""


class EmptyInputError(ValueError):
    """The trace is shorter than one analysis window."""


class RegimeLabel(str, enum.Enum):
    """Arc operating regime.

    Member order fixes the class order used for tie-breaking and for every
    per-class array in the package.
    """

    TRANSIENT = "Transient"
    STABLE = "Stable"
    EXTINCTION = "Extinction"

    @classmethod
    def parse(cls, value) -> "RegimeLabel":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text == "instable":
            # the unstable class is named both ways in the literature
            return cls.EXTINCTION
        for member in cls:
            if member.value.lower() == text:
                return member
        raise ValueError(f"unknown regime label {value!r}")

    @property
    def index(self) -> int:
        return list(RegimeLabel).index(self)


CLASS_ORDER: tuple[RegimeLabel, ...] = tuple(RegimeLabel)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded Philox generator; the only randomness source in the package."""
    if seed is None or isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class RegimeParams:
    """Knobs for one synthetic phase.

    Amplitudes are in amperes, frequencies in Hz, times in seconds.  The
    burst fields only matter for the transient regime and the modulation
    fields only for extinction.
    """

    base_amplitude: float = 100.0
    fundamental_hz: float = 50.0
    harmonic2_ratio: float = 0.1
    noise_sigma: float = 2.0
    burst_band: tuple[float, float] = (100.0, 500.0)
    burst_rate_hz: float = 120.0
    burst_duration_s: float = 0.03
    burst_amplitude: float = 80.0
    sideband_mod_hz: float = 5.0
    modulation_depth0: float = 0.3
    instability_lambda: float = 20.0
    duration_s: float = 1.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    clip_amplitude: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "burst_band", tuple(float(b) for b in self.burst_band))
        self.validate()

    def validate(self) -> None:
        numeric = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("burst_band", "clip_amplitude", "seed")
        }
        numeric["burst_band_lo"], numeric["burst_band_hi"] = self.burst_band
        if self.clip_amplitude is not None:
            numeric["clip_amplitude"] = self.clip_amplitude
        for name, value in numeric.items():
            if not math.isfinite(float(value)):
                raise ValueError(f"{name} must be finite, got {value!r}")
        for name in ("base_amplitude", "harmonic2_ratio", "noise_sigma",
                     "burst_amplitude", "modulation_depth0", "burst_rate_hz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if self.fundamental_hz <= 0 or self.burst_duration_s <= 0:
            raise ValueError("fundamental_hz and burst_duration_s must be > 0")
        lo, hi = self.burst_band
        nyquist = self.sample_rate / 2
        if not 0 <= lo < hi:
            raise ValueError(f"burst_band must satisfy 0 <= lo < hi, got {self.burst_band}")
        if hi >= nyquist:
            raise ValueError(f"burst_band {self.burst_band} must lie below Nyquist ({nyquist} Hz)")
        if self.clip_amplitude is not None and self.clip_amplitude <= 0:
            raise ValueError("clip_amplitude must be > 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["burst_band"] = list(self.burst_band)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RegimeParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown RegimeParams keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "RegimeParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class PhaseSpan:
    """Half-open sample range ``[start, stop)`` carrying one regime label."""

    label: RegimeLabel
    start: int
    stop: int


@dataclass(frozen=True)
class SignalTrace:
    """Uniformly sampled current waveform.

    ``phases`` labels contiguous sample spans.  Per-window labels follow from
    it by majority sample ownership when the trace is segmented.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    phases: tuple[PhaseSpan, ...] = ()

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        for span in self.phases:
            if not 0 <= span.start < span.stop <= len(x):
                raise ValueError(f"phase span {span} outside trace of length {len(x)}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def window_labels(self, window_len: int = DEFAULT_WINDOW,
                      hop: int = DEFAULT_HOP) -> list[tuple[int, RegimeLabel]]:
        """(window_index, label) pairs for every labelled frame."""
        return [(i, f.label) for i, f in enumerate(segment(self, window_len, hop))
                if f.label is not None]


@dataclass(frozen=True)
class Frame:
    samples: np.ndarray
    start_index: int
    label: RegimeLabel | None = None


# --------------------------------------------------------------------------
# synthesis


def _carrier(params: RegimeParams, t: np.ndarray) -> np.ndarray:
    w = 2 * np.pi * params.fundamental_hz
    a = params.base_amplitude
    return a * np.sin(w * t) + params.harmonic2_ratio * a * np.sin(2 * w * t)


def _band_limited_noise(rng: np.random.Generator, n: int, band: tuple[float, float],
                        fs: float) -> np.ndarray:
    """White noise with every FFT bin outside ``band`` zeroed, scaled to unit RMS."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    spectrum[(freqs < band[0]) | (freqs > band[1])] = 0.0
    noise = np.fft.irfft(spectrum, n)
    rms = np.sqrt(np.mean(noise**2))
    return noise / rms if rms > 0 else noise


def _bursts(params: RegimeParams, n: int, rng: np.random.Generator) -> np.ndarray:
    fs = params.sample_rate
    out = np.zeros(n)
    n_bursts = rng.poisson(params.burst_rate_hz * n / fs)
    burst_len = max(2, int(round(params.burst_duration_s * fs)))
    for _ in range(n_bursts):
        # onsets may start before the trace so that its first samples can be hit
        onset = int(rng.integers(-burst_len + 1, n))
        # log-normal gains give the heavy amplitude spread of arc striking
        gain = params.burst_amplitude * rng.lognormal(mean=0.0, sigma=0.5)
        envelope = 0.5 * (1 - np.cos(2 * np.pi * np.arange(burst_len) / (burst_len - 1)))
        burst = gain * envelope * _band_limited_noise(rng, burst_len, params.burst_band, fs)
        lo, hi = max(onset, 0), min(onset + burst_len, n)
        out[lo:hi] += burst[lo - onset:hi - onset]
    return out


def generate_phase(regime: RegimeLabel | str, params: RegimeParams) -> SignalTrace:
    """Synthesize one regime's current trace.

    Parameters
    ----------
    regime : RegimeLabel or str
        Which operating phase to produce.
    params : RegimeParams
        Amplitudes, frequencies, duration and seed.

    Returns
    -------
    SignalTrace
        Trace whose single phase span covers every sample.
    """
    regime = RegimeLabel.parse(regime)
    params.validate()
    rng = make_rng(params.seed)
    n = params.n_samples
    if n < 1:
        raise ValueError("duration_s * sample_rate rounds to zero samples")
    t = np.arange(n) / params.sample_rate
    x = _carrier(params, t)

    if regime is RegimeLabel.TRANSIENT:
        x = x + _bursts(params, n, rng)
    elif regime is RegimeLabel.EXTINCTION:
        depth = np.minimum(params.modulation_depth0 * np.exp(params.instability_lambda * t), 1.0)
        x = x * (1.0 + depth * np.cos(2 * np.pi * params.sideband_mod_hz * t))

    if params.noise_sigma > 0:
        x = x + params.noise_sigma * rng.standard_normal(n)
    if params.clip_amplitude is not None:
        x = np.clip(x, -params.clip_amplitude, params.clip_amplitude)
    return SignalTrace(x, params.sample_rate, (PhaseSpan(regime, 0, n),))


def default_phase_params(seed: int = 0, window_len: int = DEFAULT_WINDOW,
                         hop: int = DEFAULT_HOP,
                         sample_rate: float = DEFAULT_SAMPLE_RATE,
                         windows_per_phase: int = WINDOWS_PER_PHASE) -> dict[RegimeLabel, RegimeParams]:
    """Per-phase parameters of the reference three-phase recording.

    Each phase lasts exactly long enough for ``windows_per_phase`` frames at
    the given window and hop (968 samples for 200/16), so the default dataset
    holds 49 windows per class.
    """
    n = window_len + (windows_per_phase - 1) * hop
    duration = n / sample_rate
    seeds = np.random.SeedSequence(seed).generate_state(3, dtype=np.uint32)
    common = dict(duration_s=duration, sample_rate=sample_rate)
    return {
        RegimeLabel.TRANSIENT: RegimeParams(noise_sigma=3.0, seed=int(seeds[0]), **common),
        RegimeLabel.STABLE: RegimeParams(noise_sigma=2.0, seed=int(seeds[1]), **common),
        RegimeLabel.EXTINCTION: RegimeParams(noise_sigma=8.0, seed=int(seeds[2]), **common),
    }


def synthesize_dataset_trace(phase_params: dict | None = None,
                             order: Sequence[RegimeLabel | str] = (RegimeLabel.TRANSIENT,
                                                                   RegimeLabel.STABLE,
                                                                   RegimeLabel.EXTINCTION),
                             seed: int = 0) -> SignalTrace:
    """Concatenate one phase per regime into a labelled recording."""
    if phase_params is None:
        phase_params = default_phase_params(seed)
    pieces, spans, start = [], [], 0
    sample_rate = None
    for regime in order:
        regime = RegimeLabel.parse(regime)
        params = phase_params[regime]
        if sample_rate is None:
            sample_rate = params.sample_rate
        elif params.sample_rate != sample_rate:
            raise ValueError("all phases must share one sample_rate")
        piece = generate_phase(regime, params).samples
        pieces.append(piece)
        spans.append(PhaseSpan(regime, start, start + len(piece)))
        start += len(piece)
    return SignalTrace(np.concatenate(pieces), sample_rate, tuple(spans))


# --------------------------------------------------------------------------
# windowing


def frame_count(n: int, window_len: int, hop: int) -> int:
    if n < window_len:
        return 0
    return (n - window_len) // hop + 1


def _check_window(n: int, window_len: int, hop: int) -> None:
    if window_len < 1 or hop < 1:
        raise ValueError("window_len and hop must be >= 1")
    if window_len > n:
        raise EmptyInputError(f"empty input: trace of {n} samples is shorter than one "
                              f"{window_len}-sample window")


def _majority_label(phases: Iterable[PhaseSpan], lo: int, hi: int) -> RegimeLabel | None:
    owned = {}
    for span in phases:
        overlap = min(hi, span.stop) - max(lo, span.start)
        if overlap > 0:
            owned[span.label] = owned.get(span.label, 0) + overlap
    if not owned:
        return None
    # ties go to the earlier class in CLASS_ORDER
    return max(CLASS_ORDER, key=lambda c: (owned.get(c, 0), -c.index))


def segment(trace: SignalTrace, window_len: int = DEFAULT_WINDOW,
            hop: int = DEFAULT_HOP) -> list[Frame]:
    """Cut ``trace`` into frames of ``window_len`` samples every ``hop`` samples.

    The trailing partial window is discarded.  A frame's label is the regime
    owning most of its samples (unlabelled samples do not vote).
    """
    x = trace.samples
    _check_window(len(x), window_len, hop)
    frames = []
    for k in range(frame_count(len(x), window_len, hop)):
        lo = k * hop
        label = _majority_label(trace.phases, lo, lo + window_len)
        frames.append(Frame(x[lo:lo + window_len], lo, label))
    return frames


def segment_phases(trace: SignalTrace, window_len: int = DEFAULT_WINDOW,
                   hop: int = DEFAULT_HOP) -> list[Frame]:
    """Segment each labelled phase on its own so no frame straddles two regimes.

    Falls back to :func:`segment` for an unlabelled trace.  Phases shorter than
    one window contribute no frames.
    """
    if not trace.phases:
        return segment(trace, window_len, hop)
    _check_window(len(trace.samples), window_len, hop)
    frames = []
    for span in trace.phases:
        x = trace.samples[span.start:span.stop]
        for k in range(frame_count(len(x), window_len, hop)):
            lo = k * hop
            frames.append(Frame(x[lo:lo + window_len], span.start + lo, span.label))
    if not frames:
        raise EmptyInputError("empty input: no phase is as long as one window")
    return frames


# --------------------------------------------------------------------------
# file I/O


def write_trace(trace: SignalTrace, path: str | Path) -> Path:
    """Write ``time_s,current_a`` CSV; a ``.labels.json`` sidecar keeps the phases.

    Values are written with 17 significant digits so a reload is bit-exact.
    """
    path = Path(path)
    fs = trace.sample_rate
    with path.open("w", newline="") as fh:
        fh.write("time_s,current_a\n")
        for i, v in enumerate(trace.samples):
            fh.write(f"{i / fs!r},{float(v)!r}\n")
    if trace.phases:
        labels_path(path).write_text(json.dumps(
            {"sample_rate": fs,
             "phases": [{"label": s.label.value, "start": s.start, "stop": s.stop}
                        for s in trace.phases]}, indent=2) + "\n")
    return path


def labels_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".labels.json")


def _read_phases(path: Path) -> tuple[PhaseSpan, ...]:
    side = labels_path(path)
    if not side.exists():
        return ()
    data = json.loads(side.read_text())
    return tuple(PhaseSpan(RegimeLabel.parse(p["label"]), int(p["start"]), int(p["stop"]))
                 for p in data.get("phases", []))


def _load_csv(path: Path, sample_rate: float | None) -> SignalTrace:
    times, values = [], []
    n_cols = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _is_number(row[0]):
                continue  # header
            if n_cols is None:
                n_cols = len(row)
                if n_cols not in (1, 2):
                    raise TraceFormatError(f"{path}:{lineno}: expected 1 or 2 columns, got {n_cols}")
            if len(row) != n_cols:
                raise TraceFormatError(f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}")
            try:
                parsed = [float(c) for c in row]
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not all(math.isfinite(v) for v in parsed):
                raise TraceFormatError(f"{path}:{lineno}: non-finite value")
            if n_cols == 2:
                times.append(parsed[0])
            values.append(parsed[-1])

    if not values:
        raise EmptyInputError(f"empty input: {path} holds no samples")
    if n_cols == 2 and len(times) >= 2:
        t = np.asarray(times)
        dt = np.diff(t)
        step = (t[-1] - t[0]) / (len(t) - 1)
        if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step:
            raise TraceFormatError(f"{path}: timestamps are not uniform within 1 ppm")
        inferred = 1.0 / step
        snapped = round(inferred)
        if snapped > 0 and abs(inferred - snapped) <= 1e-6 * snapped:
            inferred = float(snapped)
        if sample_rate is not None and abs(sample_rate - inferred) > 1e-6 * sample_rate:
            raise TraceFormatError(f"{path}: timestamps imply {inferred} Hz, "
                                   f"but sample_rate={sample_rate} was given")
        sample_rate = inferred
    if sample_rate is None:
        raise TraceFormatError(f"{path}: sample rate required for a single-column trace")
    return SignalTrace(np.asarray(values, dtype=np.float64), float(sample_rate), _read_phases(path))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_trace(path: str | Path, format: str | None = None,
               sample_rate: float | None = None) -> SignalTrace:
    """Read a trace from CSV or WAV.

    CSV files hold either ``time_s,current_a`` (sample rate inferred from the
    timestamps, which must be uniform within 1 ppm) or a single current column,
    in which case ``sample_rate`` is required.  WAV files may be 16-bit PCM or
    float32 mono; 16-bit samples are returned in raw integer units.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return _load_csv(path, sample_rate)
    if fmt == "wav":
        from scipy.io import wavfile

        rate, data = wavfile.read(path)
        if data.ndim != 1:
            raise TraceFormatError(f"{path}: only mono WAV is supported")
        if data.dtype not in (np.int16, np.float32):
            raise TraceFormatError(f"{path}: unsupported WAV sample type {data.dtype}")
        return SignalTrace(data.astype(np.float64), float(rate), _read_phases(path))
    raise TraceFormatError(f"unsupported trace format {fmt!r}")


def write_wav(trace: SignalTrace, path: str | Path) -> Path:
    """Write a float32 mono WAV (sample rate must be an integer number of Hz)."""
    from scipy.io import wavfile

    rate = int(round(trace.sample_rate))
    if rate != trace.sample_rate:
        raise ValueError("WAV needs an integer sample rate")
    wavfile.write(path, rate, trace.samples.astype(np.float32))
    return Path(path)
