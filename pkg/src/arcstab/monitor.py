"""Streaming early-warning monitor.

Samples arrive in arbitrary chunks.  Every ``hop`` samples, once a full
window is available, the newest window is transformed, described, classified
and checked against the warning rule::

    warning = (label == Extinction) or (asi > asi_threshold)

The state keeps only the last ``window_len`` samples, and a window is always
computed from exactly the same samples whatever the chunking, so splitting a
stream differently never changes the event sequence.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

from .classify import Dataset, TrainedModel
from .features import DegenerateSpectrum, PipelineConfig, feature_vector
from .signal import DEFAULT_HOP, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW, Frame, RegimeLabel
from .tfr import DEFAULT_NFFT, hann_window, psd_frame

__all__ = [
    "MonitorConfig",
    "MonitorEvent",
    "MonitorState",
    "calibrate_threshold",
    "initial_state",
    "step",
    "Monitor",
    "read_chunks",
    "write_ndjson",
]

REASONS = ("classifier", "asi_threshold", "both", "none", "degenerate")


@dataclass(frozen=True)
class MonitorConfig:
    """Monitor settings.

    ``asi_threshold`` may be left as None to take the value stored in the
    model's calibration.  ``debounce_windows = 1`` reacts to a single window;
    larger values need that many consecutive alarming windows.  ``ewma_alpha``
    smooths the entropy rate (None keeps the raw one-hop difference).
    """

    window_len: int = DEFAULT_WINDOW
    hop: int = DEFAULT_HOP
    nfft: int = DEFAULT_NFFT
    sample_rate: float = DEFAULT_SAMPLE_RATE
    asi_threshold: float | None = None
    warmup_windows: int = 3
    debounce_windows: int = 1
    ewma_alpha: float | None = None
    model_path: str | None = None

    def __post_init__(self):
        if self.asi_threshold is not None and not self.asi_threshold > 0:
            raise ValueError("asi_threshold must be > 0")
        if self.warmup_windows < 0:
            raise ValueError("warmup_windows must be >= 0")
        if self.debounce_windows < 1:
            raise ValueError("debounce_windows must be >= 1")
        if self.ewma_alpha is not None and not 0 < self.ewma_alpha <= 1:
            raise ValueError("ewma_alpha must be in (0, 1]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MonitorConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown monitor settings: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class MonitorEvent:
    frame_time_s: float
    label: RegimeLabel | None
    scores: tuple[float, ...] | None
    asi: float | None
    thd_arc: float | None
    h_s: float | None
    dh_s_dt: float | None
    warning: bool
    reason: str
    degenerate: bool = False
    warmup: bool = False

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["label"] = None if self.label is None else self.label.value
        d["scores"] = None if self.scores is None else list(self.scores)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class MonitorState:
    """Everything the monitor carries between chunks.

    ``buffer`` holds the most recent samples (at most ``window_len``) and
    ``buffer_start`` the stream index of its first sample.
    """

    model: TrainedModel
    config: MonitorConfig
    pipeline: PipelineConfig
    threshold: float
    buffer: np.ndarray
    buffer_start: int = 0
    n_seen: int = 0
    next_start: int = 0
    n_events: int = 0
    prev_h_s: float | None = None
    rate_ewma: float | None = None
    alarm_run: int = 0
    latencies_s: list = field(default_factory=list)


def calibrate_threshold(ds: Dataset, model: TrainedModel | None = None,
                        quantile: float = 0.99) -> float:
    """Default ASI threshold: the given quantile of stable-regime training ASI."""
    col = list(ds.feature_names).index("asi")
    stable = ds.X[ds.y == RegimeLabel.STABLE.index, col]
    if not len(stable):
        raise ValueError("no stable windows to calibrate the ASI threshold")
    return float(np.quantile(stable, quantile))


def initial_state(model: TrainedModel, config: MonitorConfig | None = None,
                  pipeline: PipelineConfig | None = None) -> MonitorState:
    cfg = config or MonitorConfig()
    delta = cfg.asi_threshold if cfg.asi_threshold is not None else model.calibration.get("asi_threshold")
    if delta is None or not delta > 0:
        raise ValueError("no ASI threshold: set asi_threshold or calibrate the model")
    base = pipeline or PipelineConfig()
    pipe = dataclasses.replace(base, window_len=cfg.window_len, hop=cfg.hop, nfft=cfg.nfft)
    return MonitorState(model, cfg, pipe, float(delta), np.zeros(0))


def _event(state: MonitorState, samples: np.ndarray, start: int) -> MonitorEvent:
    cfg, pipe = state.config, state.pipeline
    fs = cfg.sample_rate
    frame = Frame(samples, start)
    psd = psd_frame(frame, hann_window(pipe.window_len), pipe.nfft, fs)
    warmup = state.n_events < cfg.warmup_windows
    try:
        fv = feature_vector(frame, psd, pipe)
    except DegenerateSpectrum:
        state.prev_h_s = None
        state.rate_ewma = None
        state.alarm_run += 1
        # an unmeasurable window is treated as unsafe, even during warmup
        return MonitorEvent(psd.frame_time_s, None, None, None, None, None, None,
                            warning=True, reason="degenerate", degenerate=True, warmup=warmup)

    label, scores = state.model.predict(fv)
    rate = None
    if state.prev_h_s is not None:
        rate = (fv.h_s - state.prev_h_s) * fs / pipe.hop
        if cfg.ewma_alpha is not None:
            prev = state.rate_ewma if state.rate_ewma is not None else rate
            rate = cfg.ewma_alpha * rate + (1 - cfg.ewma_alpha) * prev
            state.rate_ewma = rate
    state.prev_h_s = fv.h_s

    by_model = label is RegimeLabel.EXTINCTION
    by_asi = fv.asi > state.threshold
    reason = {(True, True): "both", (True, False): "classifier",
              (False, True): "asi_threshold", (False, False): "none"}[(by_model, by_asi)]
    state.alarm_run = state.alarm_run + 1 if (by_model or by_asi) else 0
    warning = state.alarm_run >= cfg.debounce_windows and not warmup
    return MonitorEvent(psd.frame_time_s, label, tuple(float(s) for s in scores), fv.asi,
                        fv.thd_arc, fv.h_s, rate, warning, reason, warmup=warmup)


def step(state: MonitorState, chunk) -> tuple[MonitorState, list[MonitorEvent]]:
    """Feed ``chunk`` and return the updated state with any completed events.

    The input state is not modified.
    """
    x = np.asarray(chunk, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("chunk contains non-finite samples")
    st = dataclasses.replace(state, latencies_s=list(state.latencies_s))
    L, hop = st.config.window_len, st.config.hop
    data = np.concatenate([st.buffer, x])
    base = st.buffer_start
    end = st.n_seen + len(x)
    events = []
    while st.next_start + L <= end:
        t0 = time.perf_counter()
        lo = st.next_start - base
        ev = _event(st, data[lo:lo + L].copy(), st.next_start)
        st.latencies_s.append(time.perf_counter() - t0)
        events.append(ev)
        st.n_events += 1
        st.next_start += hop
    keep = min(L, len(data))
    st.buffer = data[len(data) - keep:].copy()
    st.buffer_start = end - keep
    st.n_seen = end
    return st, events


class Monitor:
    """Convenience owner of a :class:`MonitorState`.

    >>> mon = Monitor(model, MonitorConfig(asi_threshold=10.0))
    >>> events = mon.feed(samples)
    """

    def __init__(self, model: TrainedModel, config: MonitorConfig | None = None,
                 pipeline: PipelineConfig | None = None):
        self.state = initial_state(model, config, pipeline)

    def feed(self, chunk) -> list[MonitorEvent]:
        self.state, events = step(self.state, chunk)
        return events

    def run(self, chunks: Iterable) -> Iterator[MonitorEvent]:
        """Yield events as soon as their window completes."""
        for chunk in chunks:
            yield from self.feed(chunk)

    @property
    def latencies_s(self) -> list[float]:
        return list(self.state.latencies_s)


def read_chunks(fh: IO, fmt: str = "csv", chunk_size: int = 1000) -> Iterator[np.ndarray]:
    """Samples from a text stream of CSV lines or a binary float32 LE stream.

    CSV lines may hold one value or ``time,value``; the last column is used
    and a non-numeric first line is skipped as a header.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if fmt in ("f32", "float32", "binary"):
        raw = fh.buffer if hasattr(fh, "buffer") else fh
        while True:
            blob = raw.read(4 * chunk_size)
            if not blob:
                return
            if len(blob) % 4:
                raise ValueError("binary stream length is not a multiple of 4 bytes")
            yield np.frombuffer(blob, dtype="<f4").astype(np.float64)
    elif fmt == "csv":
        buf = []
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cell = line.split(",")[-1]
            try:
                buf.append(float(cell))
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"line {lineno}: not a number: {cell!r}") from None
            if len(buf) == chunk_size:
                yield np.array(buf)
                buf = []
        if buf:
            yield np.array(buf)
    else:
        raise ValueError(f"unknown stream format {fmt!r}")


def write_ndjson(events: Iterable[MonitorEvent], fh: IO = sys.stdout) -> int:
    """One JSON object per line, flushed after each; returns the count."""
    n = 0
    for ev in events:
        fh.write(ev.to_json() + "\n")
        fh.flush()
        n += 1
    return n
