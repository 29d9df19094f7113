"""Run configuration shared by the command-line stages.

A config is a JSON document with five sections (``generate``, ``pipeline``,
``train``, ``eval``, ``monitor``) plus a master ``seed``.  Missing keys take
defaults, unknown keys are rejected.  :meth:`RunConfig.hash` digests the
fully resolved document, so two configs that resolve to the same settings
share a hash however they were written.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .classify import Hyperparams, ModelKind
from .features import PipelineConfig
from .monitor import MonitorConfig
from .signal import (CLASS_ORDER, WINDOWS_PER_PHASE, RegimeLabel, RegimeParams,
                     default_phase_params)

__all__ = ["GenerateConfig", "TrainConfig", "EvalConfig", "RunConfig", "canonical_json"]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _check_keys(section: str, d: dict, allowed) -> None:
    if not isinstance(d, dict):
        raise ValueError(f"config section {section!r} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in {section!r}: {sorted(unknown)}")


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


@dataclass(frozen=True)
class GenerateConfig:
    """Synthetic recording layout.

    ``phases`` maps a regime name to overrides of its default
    :class:`~arcstab.signal.RegimeParams` (seeds are derived from the master
    seed unless given here).
    """

    windows_per_phase: int = WINDOWS_PER_PHASE
    order: tuple[str, ...] = tuple(c.value for c in CLASS_ORDER)
    phases: dict = field(default_factory=dict)

    def phase_params(self, seed: int, pipeline: PipelineConfig,
                     sample_rate: float) -> dict[RegimeLabel, RegimeParams]:
        base = default_phase_params(seed, pipeline.window_len, pipeline.hop, sample_rate,
                                    self.windows_per_phase)
        out = {}
        for label, params in base.items():
            overrides = self.phases.get(label.value, {})
            _check_keys(f"generate.phases.{label.value}", overrides, _fields(RegimeParams))
            out[label] = params.replace(**overrides)
        return out


@dataclass(frozen=True)
class TrainConfig:
    kind: str = ModelKind.SVM_RBF.value
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    grid_search: bool = False
    asi_quantile: float = 0.99


@dataclass(frozen=True)
class EvalConfig:
    test_fraction: float = 0.25
    split_seed: int = 42
    kfold: int = 10
    loo: bool = True
    ci_level: float = 0.95
    ci_method: str = "wald"
    importance_repeats: int = 10
    baselines: tuple[str, ...] = ("Knn", "Tree", "Bagged")
    thresholds: dict = field(default_factory=dict)


_THRESHOLD_KEYS = {"accuracy", "macro_f1", "cv_mean", "auc_min"}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sample_rate: float = 10_000.0
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        _check_keys("config", d, {"seed", "sample_rate", "generate", "pipeline", "train",
                                  "eval", "monitor"})
        gen = d.get("generate", {})
        _check_keys("generate", gen, _fields(GenerateConfig))
        for name in gen.get("phases", {}):
            RegimeLabel.parse(name)
        gen = dict(gen)
        if "order" in gen:
            gen["order"] = tuple(RegimeLabel.parse(x).value for x in gen["order"])
        gen["phases"] = {RegimeLabel.parse(k).value: v for k, v in gen.get("phases", {}).items()}

        pipe = d.get("pipeline", {})
        _check_keys("pipeline", pipe, _fields(PipelineConfig))

        tr = dict(d.get("train", {}))
        _check_keys("train", tr, _fields(TrainConfig))
        if "kind" in tr:
            tr["kind"] = ModelKind.parse(tr["kind"]).value
        tr["hyperparams"] = Hyperparams.from_dict(tr.get("hyperparams"))

        ev = dict(d.get("eval", {}))
        _check_keys("eval", ev, _fields(EvalConfig))
        _check_keys("eval.thresholds", ev.get("thresholds", {}), _THRESHOLD_KEYS)
        if "baselines" in ev:
            ev["baselines"] = tuple(ModelKind.parse(k).value for k in ev["baselines"])

        seed = d.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ValueError("seed must be a non-negative integer")
        cfg = cls(seed=seed, sample_rate=float(d.get("sample_rate", 10_000.0)),
                  generate=GenerateConfig(**gen), pipeline=PipelineConfig(**pipe),
                  train=TrainConfig(**tr), eval=EvalConfig(**ev),
                  monitor=MonitorConfig.from_dict(d.get("monitor", {})))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text()))

    def validate(self) -> None:
        m, p = self.monitor, self.pipeline
        if (m.window_len, m.hop, m.nfft) != (p.window_len, p.hop, p.nfft):
            raise ValueError("monitor window/hop/nfft must match the pipeline section")
        if m.sample_rate != self.sample_rate:
            raise ValueError("monitor sample_rate must match the top-level sample_rate")
        if not 0 < self.eval.test_fraction < 1:
            raise ValueError("eval.test_fraction must be in (0, 1)")
        if self.eval.ci_method not in ("wald", "wilson"):
            raise ValueError("eval.ci_method must be 'wald' or 'wilson'")
        # resolve phase overrides now so bad values fail at load time
        self.generate.phase_params(self.seed, self.pipeline, self.sample_rate)

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["generate"]["order"] = list(self.generate.order)
        d["eval"]["baselines"] = list(self.eval.baselines)
        d["train"]["hyperparams"] = self.train.hyperparams.to_dict()
        return d

    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()
