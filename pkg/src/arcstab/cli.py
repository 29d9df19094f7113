"""``arcstab`` command line: synth, extract, train, eval, monitor, report.

Stages talk through files in the ``--out`` directory, so running::

    arcstab synth --out run && arcstab extract --out run && \\
    arcstab train --out run && arcstab eval --out run

leaves ``trace.csv``, ``features.csv``, ``model.json`` and ``report.json``
(plus curve CSVs) in ``run/``.  Every artifact records the hash of the
resolved configuration.  Failures print one JSON object on stderr and exit
non-zero.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classify import ModelKind, TrainedModel, train
from .config import RunConfig
from .evaluation import (cross_validate, evaluate_holdout, fisher_table,
                         grid_search_svm, permutation_importance, split_holdout)
from .features import extract
from .monitor import Monitor, calibrate_threshold, read_chunks, write_ndjson
from .signal import CLASS_ORDER, load_trace, synthesize_dataset_trace, write_trace
from .tables import load_dataset, write_feature_csv
from .tfr import export_spectrogram, spectrogram

REPORT_FORMAT = "arcstab-report"
EXIT_ERROR = 2
EXIT_THRESHOLD = 3


class StageError(Exception):
    pass


def _write_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")
    return path


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def _write_meta(path: Path, cfg: RunConfig, **info) -> Path:
    return _write_json(_meta_path(path), {"artifact": path.name, "config_hash": cfg.hash(),
                                          "seed": cfg.seed, **info})


def _check_format(args, allowed: tuple[str, ...]) -> str:
    fmt = args.format or allowed[0]
    if fmt not in allowed:
        raise StageError(f"--format {fmt} is not available for '{args.command}' "
                         f"(choose from {', '.join(allowed)})")
    return fmt


def _input(args, default_name: str) -> Path:
    path = Path(args.input) if args.input else Path(args.out) / default_name
    if not path.exists():
        raise StageError(f"input not found: {path}")
    return path


# -- stages -------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    _check_format(args, ("csv",))
    params = cfg.generate.phase_params(cfg.seed, cfg.pipeline, cfg.sample_rate)
    trace = synthesize_dataset_trace(params, cfg.generate.order)
    path = write_trace(trace, Path(args.out) / "trace.csv")
    _write_meta(path, cfg, n_samples=len(trace), sample_rate=trace.sample_rate)
    return 0


def cmd_extract(args, cfg: RunConfig) -> int:
    _check_format(args, ("csv",))
    trace = load_trace(_input(args, "trace.csv"), sample_rate=args.sample_rate)
    if len(trace) == 0:
        raise StageError("empty input: the trace has no samples")
    rows = extract(trace, cfg.pipeline)
    out = write_feature_csv(rows, Path(args.out) / "features.csv")
    counts = {c.value: sum(1 for f, _ in rows if f.label is c) for c in CLASS_ORDER}
    _write_meta(out, cfg, n_windows=len(rows), per_class=counts)
    if args.spectrogram:
        frames = spectrogram(trace, cfg.pipeline.window_len, cfg.pipeline.hop, cfg.pipeline.nfft)
        mat, _ = export_spectrogram(frames, Path(args.out) / "spectrogram.csv",
                                    cfg.pipeline.hop / trace.sample_rate)
        _write_meta(mat, cfg)
    return 0


def _fit(cfg: RunConfig, ds):
    hp = cfg.train.hyperparams
    table = None
    kind = ModelKind.parse(cfg.train.kind)
    if cfg.train.grid_search and kind is ModelKind.SVM_RBF:
        hp, table = grid_search_svm(ds, k=5, seed=cfg.seed, base=hp)
    return train(ds, kind, hp), table


def cmd_train(args, cfg: RunConfig) -> int:
    _check_format(args, ("json",))
    ds = load_dataset(_input(args, "features.csv"))
    model, table = _fit(cfg, ds)
    delta = calibrate_threshold(ds, quantile=cfg.train.asi_quantile)
    model = model.with_calibration(asi_threshold=delta, asi_quantile=cfg.train.asi_quantile)
    extra = {"config_hash": cfg.hash(), "n_train": len(ds)}
    if table is not None:
        extra["grid_search"] = [{"C": c, "gamma": g, "cv_accuracy": a} for c, g, a in table]
    model.save(Path(args.out) / "model.json", extra)
    return 0


def build_report(cfg: RunConfig, ds) -> tuple[dict, dict]:
    """Deterministic report body and the separate timing section."""
    ev = cfg.eval
    kind = ModelKind.parse(cfg.train.kind)
    tr, te = split_holdout(ds, ev.test_fraction, ev.split_seed)
    hp = cfg.train.hyperparams
    grid = None
    if cfg.train.grid_search and kind is ModelKind.SVM_RBF:
        hp, grid = grid_search_svm(tr, k=5, seed=cfg.seed, base=hp)
    report, model = evaluate_holdout(tr, te, kind, hp, ev.ci_level, ev.ci_method)
    timing = {kind.value: dict(report.timing)}

    cv = {}
    t0 = time.perf_counter()
    if ev.kfold:
        cv[f"kfold{ev.kfold}"] = cross_validate(ds, "kfold", ev.kfold, kind, hp, cfg.seed)
    if ev.loo:
        cv["loo"] = cross_validate(ds, "loo", kind=kind, hp=hp, seed=cfg.seed)
    timing["cv_s"] = time.perf_counter() - t0
    report.cv = cv

    baselines = {}
    for name in ev.baselines:
        b, _ = evaluate_holdout(tr, te, name, hp, ev.ci_level, ev.ci_method)
        baselines[b.kind.value] = {"accuracy": b.metrics.accuracy, "macro_f1": b.metrics.macro_f1}
        timing[b.kind.value] = dict(b.timing)

    importance = permutation_importance(model, te, ev.importance_repeats, cfg.seed)
    counts = ds.class_counts()
    body = {
        "format": REPORT_FORMAT,
        "version": 1,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seeds": {"master": cfg.seed, "split": ev.split_seed},
        "dataset": {"n_windows": len(ds), "per_class": {c.value: n for c, n in counts.items()},
                    "n_features": ds.X.shape[1], "feature_names": list(ds.feature_names),
                    "n_train": len(tr), "n_test": len(te)},
        "holdout": report.to_dict(with_timing=False),
        "hyperparams": hp.to_dict(),
        "baselines": baselines,
        "fisher": fisher_table(ds),
        "importance": [{"feature": f, "score": s} for f, s in importance],
    }
    if grid is not None:
        body["grid_search"] = [{"C": c, "gamma": g, "cv_accuracy": a} for c, g, a in grid]
    body["holdout"]["ci"]["method"] = ev.ci_method
    body["thresholds"] = _check_thresholds(ev.thresholds, body, cv)
    return body, timing


def _check_thresholds(thresholds: dict, body: dict, cv) -> dict:
    h = body["holdout"]
    aucs = [c["auc"] for c in h["roc"].values() if c["auc"] is not None]
    observed = {"accuracy": h["accuracy"], "macro_f1": h["macro_f1"],
                "auc_min": min(aucs) if aucs else None,
                "cv_mean": next(iter(cv.values())).mean if cv else None}
    checks = {}
    for key, minimum in sorted(thresholds.items()):
        value = observed[key]
        checks[key] = {"minimum": minimum, "observed": value,
                       "passed": value is not None and value >= minimum}
    return {"checks": checks, "passed": all(c["passed"] for c in checks.values())}


def cmd_eval(args, cfg: RunConfig) -> int:
    _check_format(args, ("json",))
    ds = load_dataset(_input(args, "features.csv"))
    body, timing = build_report(cfg, ds)
    out = Path(args.out)
    _write_json(out / "report.json", {**body, "timing": timing})
    # curves are re-derived from the body so the CSVs match the JSON exactly
    for family, cols in (("roc", ("fpr", "tpr")), ("pr", ("recall", "precision"))):
        path = out / f"{family}.csv"
        lines = [f"class,{cols[0]},{cols[1]},threshold"]
        for cls, curve in body["holdout"][family].items():
            for x, y, t in zip(curve["x"], curve["y"], curve["thresholds"]):
                lines.append(f"{cls},{x!r},{y!r},{'' if t is None else repr(t)}")
        path.write_text("\n".join(lines) + "\n")
        _write_meta(path, cfg)
    if not body["thresholds"]["passed"]:
        failed = [k for k, c in body["thresholds"]["checks"].items() if not c["passed"]]
        print(json.dumps({"error": "threshold violated", "failed": failed}), file=sys.stderr)
        return EXIT_THRESHOLD
    return 0


def cmd_monitor(args, cfg: RunConfig) -> int:
    _check_format(args, ("ndjson",))
    model_path = Path(args.model or cfg.monitor.model_path or Path(args.out) / "model.json")
    if not model_path.exists():
        raise StageError(f"model not found: {model_path}")
    model = TrainedModel.load(model_path)
    mon = Monitor(model, cfg.monitor, cfg.pipeline)
    source = args.input or "-"
    mode = "rb" if args.stream_format == "f32" else "r"
    fh = (sys.stdin.buffer if mode == "rb" else sys.stdin) if source == "-" else open(source, mode)
    sink = open(args.events, "w") if args.events else sys.stdout
    try:
        n = write_ndjson(mon.run(read_chunks(fh, args.stream_format, args.chunk_size)), sink)
    finally:
        if fh not in (sys.stdin, sys.stdin.buffer):
            fh.close()
        if sink is not sys.stdout:
            sink.close()
    lat = mon.latencies_s
    median_ms = 1e3 * float(np.median(lat)) if lat else None
    if args.events:
        _write_meta(Path(args.events), cfg, n_events=n, model=str(model_path))
    summary = {"events": n, "median_event_ms": median_ms}
    if median_ms is not None and median_ms > 1.0:
        summary["warning"] = "median per-event processing above 1 ms"
    print(json.dumps(summary), file=sys.stderr)
    return 0


def format_report(doc: dict) -> str:
    """Plain-text summary of a report document."""
    ds, h = doc["dataset"], doc["holdout"]
    names = [c.value for c in CLASS_ORDER]
    lines = [
        f"model        {h['model']}",
        f"config hash  {doc['config_hash'][:16]}",
        f"dataset      {ds['n_windows']} windows ("
        + ", ".join(f"{k} {v}" for k, v in ds["per_class"].items()) + ")",
        f"hold-out     {100 * h['accuracy']:.1f}% on {h['n_test']} windows, "
        f"{100 * h['ci']['level']:.0f}% CI [{100 * h['ci']['low']:.2f}, {100 * h['ci']['high']:.2f}]",
        f"macro F1     {h['macro_f1']:.3f}",
    ]
    for name, cv in h.get("cv", {}).items():
        lines.append(f"{name:<12} {100 * cv['mean']:.1f} ± {100 * cv['std']:.1f}")
    lines.append("")
    lines.append("confusion (rows truth, cols predicted)")
    lines.append(" " * 12 + "".join(f"{n[:10]:>11}" for n in names))
    for n, row in zip(names, h["confusion"]):
        lines.append(f"{n[:10]:<12}" + "".join(f"{v:>11d}" for v in row))
    lines.append("")
    lines.append(f"{'class':<12}{'precision':>10}{'recall':>10}{'F1':>10}{'AUC':>10}")
    for n in names:
        pc = h["per_class"][n]
        auc = h["roc"][n]["auc"]
        lines.append(f"{n:<12}{pc['precision']:>10.3f}{pc['recall']:>10.3f}{pc['f1']:>10.3f}"
                     + (f"{auc:>10.3f}" if auc is not None else f"{'n/a':>10}"))
    if doc.get("baselines"):
        lines.append("")
        lines.append("baselines    " + ", ".join(f"{k} {100 * v['accuracy']:.1f}%"
                                                for k, v in doc["baselines"].items()))
    if doc.get("importance"):
        top = doc["importance"][:5]
        lines.append("importance   " + ", ".join(f"{e['feature']} {e['score']:.3f}" for e in top))
    if doc.get("fisher"):
        lines.append("fisher J     " + ", ".join(f"{k} {v:.3f}" for k, v in doc["fisher"].items()))
    if "timing" in doc:
        t = doc["timing"].get(h["model"], {})
        if t:
            lines.append(f"timing       train {t['train_s']:.3f} s, "
                         f"inference {1e3 * t['inference_per_sample_s']:.3f} ms/window")
    return "\n".join(lines) + "\n"


def cmd_report(args, cfg: RunConfig) -> int:
    fmt = _check_format(args, ("text", "json"))
    doc = json.loads(_input(args, "report.json").read_text())
    if doc.get("format") != REPORT_FORMAT:
        raise StageError("input is not an arcstab report")
    if fmt == "json":
        h = doc["holdout"]
        print(json.dumps({"config_hash": doc["config_hash"], "model": h["model"],
                          "accuracy": h["accuracy"], "macro_f1": h["macro_f1"],
                          "ci": h["ci"], "dataset": doc["dataset"]}, indent=1))
    else:
        sys.stdout.write(format_report(doc))
    return 0


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "train": cmd_train, "eval": cmd_eval,
            "monitor": cmd_monitor, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON (defaults when omitted)")
    common.add_argument("--seed", type=int, help="override the configured master seed")
    common.add_argument("--out", default=".", help="artifact directory (default: .)")
    common.add_argument("--format", choices=("csv", "ndjson", "json", "text"),
                        help="output format, where a stage offers a choice")
    common.add_argument("--input", help="input file (default: the stage's file in --out)")

    p = argparse.ArgumentParser(prog="arcstab", description="Arc regime classification toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic three-phase trace")
    ex = sub.add_parser("extract", parents=[common], help="trace -> feature CSV")
    ex.add_argument("--sample-rate", type=float, help="sample rate for single-column traces")
    ex.add_argument("--spectrogram", action="store_true", help="also export the spectrogram")
    sub.add_parser("train", parents=[common], help="feature CSV -> model JSON")
    sub.add_parser("eval", parents=[common], help="feature CSV -> report JSON and curve CSVs")
    mo = sub.add_parser("monitor", parents=[common], help="sample stream -> NDJSON events")
    mo.add_argument("--model", help="model JSON (default: model.json in --out)")
    mo.add_argument("--stream-format", choices=("csv", "f32"), default="csv",
                    help="CSV lines or raw little-endian float32")
    mo.add_argument("--chunk-size", type=int, default=1000)
    mo.add_argument("--events", help="write events here instead of standard output")
    sub.add_parser("report", parents=[common], help="summarise a report JSON")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config).with_seed(args.seed)
        if args.command not in ("monitor", "report"):
            Path(args.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # every failure becomes one JSON line on stderr
        print(json.dumps({"error": str(exc), "type": type(exc).__name__,
                          "command": args.command}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
