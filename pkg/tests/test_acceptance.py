"""Acceptance checks, one per criterion, each reporting a PASS/FAIL line.

Run under pytest (lines are echoed in the terminal summary) or directly::

    python tests/test_acceptance.py
"""

import json
import math
import statistics
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from arcstab.classify import Dataset, svm_kkt_report, train  # noqa: E402
from arcstab.classify.svm import kkt_residuals, rbf_kernel, smo  # noqa: E402
from arcstab.cli import main as cli_main  # noqa: E402
from arcstab.evaluation import (binomial_ci, mann_whitney_auc, roc_curve,  # noqa: E402
                                roc_curves, split_holdout)
from arcstab.features import FEATURE_NAMES, extract, feature_vector, time_features  # noqa: E402
from arcstab.features import spectral_entropy, thd_arc  # noqa: E402
from arcstab.monitor import Monitor, MonitorConfig, calibrate_threshold  # noqa: E402
from arcstab.signal import (RegimeLabel, default_phase_params, generate_phase,  # noqa: E402
                            make_rng, segment_phases, synthesize_dataset_trace)
from arcstab.tfr import psd_frame, windowed_mean_power  # noqa: E402
from oracles import psd_direct  # noqa: E402

T, S, E = RegimeLabel.TRANSIENT, RegimeLabel.STABLE, RegimeLabel.EXTINCTION

# tolerances, pinned
DFT_RTOL = 1e-9
DFT_BUDGET_S = 10.0
PARSEVAL_RTOL = 1e-9
RMS_RTOL, CF_RTOL, K_RTOL = 1e-3, 1e-2, 2e-2
THD_MAX, HS_MAX = 1e-6, 1.0
SCALE_RTOL, RMS_SCALE_RTOL = 1e-9, 1e-12
CI_ATOL = 5e-4
HOLDOUT_MIN = 0.90
HOLDOUT_BUDGET_S = 30.0
AUC_ATOL = 1e-9
AUC_MIN = 0.95
KKT_MAX, EQ_MAX = 1e-3, 1e-9
EARLY_WINDOWS = 5
LATENCY_SOFT_MS = 1.0


def _dataset(seed=0):
    rows = extract(synthesize_dataset_trace(seed=seed))
    return rows, Dataset.from_vectors([v for _, v in rows], [f.label for f, _ in rows])


def tone(n=200, amp=100.0, freq=50.0, fs=10_000.0, phase=math.pi / 4):
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / fs + phase)


def check_1():
    rng = make_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(200) * rng.uniform(0.1, 100)
        fast = psd_frame(x, nfft=4096).power
        slow = psd_direct(x, nfft=4096)
        worst = max(worst, float(np.max(np.abs(fast - slow)) / np.max(slow)))
    elapsed = time.perf_counter() - t0
    ok = worst <= DFT_RTOL and elapsed <= DFT_BUDGET_S
    return ok, f"max rel err {worst:.2e} (<= {DFT_RTOL:g}), {elapsed:.2f} s (<= {DFT_BUDGET_S:g} s)"


def check_2():
    rng = make_rng(202)
    worst = 0.0
    for _ in range(1000):
        x = rng.standard_normal(200) * rng.uniform(0.1, 100) + rng.uniform(-50, 50)
        p = psd_frame(x)
        ref = windowed_mean_power(x)
        worst = max(worst, abs(p.total_power - ref) / ref)
    return worst <= PARSEVAL_RTOL, f"max rel err {worst:.2e} (<= {PARSEVAL_RTOL:g}) over 1000 frames"


def check_3():
    x = tone()
    tf = time_features(x)
    p = psd_frame(x)
    thd = thd_arc(p)
    hs = spectral_entropy(p)
    parts = {
        "rms": abs(tf.rms - 100 / math.sqrt(2)) <= RMS_RTOL * 100 / math.sqrt(2),
        "cf": abs(tf.cf - math.sqrt(2)) <= CF_RTOL * math.sqrt(2),
        "k": abs(tf.k - 1.5) <= K_RTOL * 1.5,
        "thd": thd <= THD_MAX,
        "h_s": hs <= HS_MAX,
        "zcr": tf.zcr == 2 / 199,
    }
    detail = (f"rms {tf.rms:.4f}, cf {tf.cf:.4f}, k {tf.k:.4f}, thd {thd:.3g} (<= {THD_MAX:g}), "
              f"h_s {hs:.3f} nat (<= {HS_MAX:g}), zcr {tf.zcr:.6f}; failing: "
              + (", ".join(k for k, v in parts.items() if not v) or "none"))
    return all(parts.values()), detail


def check_4():
    trace = synthesize_dataset_trace(seed=3)
    frames = segment_phases(trace)[::7]
    rms_i = FEATURE_NAMES.index("rms")
    worst, worst_rms = 0.0, 0.0
    for f in frames:
        a = feature_vector(f.samples, psd_frame(f.samples)).as_array()
        y = 7 * f.samples
        b = feature_vector(y, psd_frame(y)).as_array()
        for i in range(len(a)):
            rel = abs(b[i] - a[i]) / max(abs(a[i]), 1e-300) if i != rms_i else 0.0
            worst = max(worst, rel)
        worst_rms = max(worst_rms, abs(b[rms_i] - 7 * a[rms_i]) / (7 * a[rms_i]))
    ok = worst <= SCALE_RTOL and worst_rms <= RMS_SCALE_RTOL
    return ok, (f"{len(frames)} frames: scale-free max rel change {worst:.2e} (<= {SCALE_RTOL:g}), "
                f"rms x7 rel err {worst_rms:.2e} (<= {RMS_SCALE_RTOL:g})")


def check_5():
    lo, hi = binomial_ci(0.8707, 147, 0.95)
    ok = abs(lo - 0.8165) <= CI_ATOL and abs(hi - 0.9250) <= CI_ATOL
    return ok, f"[{lo:.4f}, {hi:.4f}] vs [0.8165, 0.9250] (+-{CI_ATOL:g})"


def check_6():
    _, ds = _dataset()
    counts = ds.class_counts()
    ok = ds.X.shape == (147, 10) and all(v == 49 for v in counts.values())
    return ok, f"shape {ds.X.shape}, per class " + ", ".join(f"{k.value} {v}" for k, v in counts.items())


def check_7():
    t0 = time.perf_counter()
    _, ds = _dataset()
    tr, te = split_holdout(ds, 0.25, 42)
    svm = train(tr, "svm")
    tree = train(tr, "tree")
    acc_svm = float(np.mean(svm.predict_many(te.X) == te.y))
    acc_tree = float(np.mean(tree.predict_many(te.X) == te.y))
    elapsed = time.perf_counter() - t0
    ok = acc_svm >= HOLDOUT_MIN and acc_svm >= acc_tree and elapsed <= HOLDOUT_BUDGET_S
    return ok, (f"SVM {acc_svm:.4f} (>= {HOLDOUT_MIN}), tree {acc_tree:.4f}, "
                f"{elapsed:.2f} s (<= {HOLDOUT_BUDGET_S:g} s)")


def check_8():
    worst = 0.0
    for seed in range(20):
        rng = make_rng(800 + seed)
        n = int(rng.integers(50, 400))
        s = rng.standard_normal(n)
        if seed % 2:
            s = np.round(s, 1)  # exercise ties
        pos = rng.random(n) < rng.uniform(0.2, 0.8)
        worst = max(worst, abs(roc_curve(s, pos).auc - mann_whitney_auc(s, pos)))
    perfect = roc_curve(np.r_[np.ones(10), np.zeros(10)], np.r_[np.ones(10), np.zeros(10)] > 0).auc
    _, ds = _dataset()
    tr, te = split_holdout(ds, 0.25, 42)
    curves = roc_curves(train(tr, "svm").decision_function(te.X), te.y)
    a_s, a_e = curves[S].auc, curves[E].auc
    ok = worst <= AUC_ATOL and perfect == 1.0 and a_s >= AUC_MIN and a_e >= AUC_MIN
    return ok, (f"trapezoid vs Mann-Whitney max diff {worst:.1e} (<= {AUC_ATOL:g}), perfect {perfect}, "
                f"AUC Stable {a_s:.4f}, Extinction {a_e:.4f} (>= {AUC_MIN})")


def check_9():
    _, ds = _dataset()
    model = train(ds, "svm")
    rep = svm_kkt_report(model, ds)
    kkt = max(r["max_kkt_residual"] for r in rep)
    eq = max(abs(r["sum_alpha_y"]) for r in rep)
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float)
    y = np.array([1, 1, -1, -1], float)
    K = rbf_kernel(X, X, 1.0)
    sol = smo(K, y, 10.0)
    f = K @ (sol.alpha * y) + sol.bias
    xor_ok = bool(np.all(np.sign(f) == y)) and float(kkt_residuals(sol.alpha, y, f, 10.0).max()) <= KKT_MAX
    ok = kkt <= KKT_MAX and eq <= EQ_MAX and xor_ok and len(rep) == 3
    return ok, (f"max KKT residual {kkt:.2e} (<= {KKT_MAX:g}), max |sum a y| {eq:.1e} (<= {EQ_MAX:g}), "
                f"XOR {'4/4' if xor_ok else 'failed'}")


def _feed(model, x, size, config=None):
    mon = Monitor(model, config)
    events = []
    for i in range(0, len(x), size):
        events.extend(mon.feed(x[i:i + size]))
    return events, mon.latencies_s


def check_10():
    _, ds = _dataset(0)
    model = train(ds, "svm").with_calibration(asi_threshold=calibrate_threshold(ds))
    params = default_phase_params(1)
    ext = generate_phase(E, params[E]).samples
    stable = generate_phase(S, params[S]).samples

    ev1, _ = _feed(model, ext, 1)
    ev1000, lat = _feed(model, ext, 1000)
    assoc = [e.to_json() for e in ev1] == [e.to_json() for e in ev1000]
    warn = [i for i, e in enumerate(ev1000) if e.warning]
    first = warn[0] if warn else None
    early = first is not None and first <= len(ev1000) - 1 - EARLY_WINDOWS

    evs, lat_s = _feed(model, stable, 1000, MonitorConfig(asi_threshold=10.0))
    quiet = not any(e.warning for e in evs if not e.warmup)

    median_ms = 1e3 * statistics.median(lat + lat_s)
    soft = "ok" if median_ms <= LATENCY_SOFT_MS else "SOFT WARNING"
    ok = assoc and early and quiet
    return ok, (f"chunking 1 vs 1000 {'identical' if assoc else 'DIFFER'} ({len(ev1)} events); "
                f"first extinction warning at window {first} of {len(ev1000)} "
                f"(>= {EARLY_WINDOWS} before end); stable warnings after warmup "
                f"{sum(e.warning for e in evs if not e.warmup)}; "
                f"median {median_ms:.3f} ms/event [{soft}, <= {LATENCY_SOFT_MS:g} ms]")


def check_11():
    _, ds = _dataset()
    col = {n: i for i, n in enumerate(ds.feature_names)}
    mean = {c: ds.X[ds.y == c.index].mean(axis=0) for c in (T, S, E)}
    asi_ok = mean[S][col["asi"]] < mean[E][col["asi"]]
    hs_ok = mean[S][col["h_s"]] < mean[T][col["h_s"]]
    return asi_ok and hs_ok, (
        f"mean ASI Stable {mean[S][col['asi']]:.4f} < Extinction {mean[E][col['asi']]:.4f}: "
        f"{'yes' if asi_ok else 'NO'}; mean H_s Stable {mean[S][col['h_s']]:.4f} < "
        f"Transient {mean[T][col['h_s']]:.4f}: {'yes' if hs_ok else 'NO'}")


def check_12():
    with tempfile.TemporaryDirectory() as tmp:
        outs = [Path(tmp) / "a", Path(tmp) / "b"]
        for out in outs:
            for cmd in ("synth", "extract", "train", "eval"):
                code = cli_main([cmd, "--out", str(out), "--seed", "0"])
                if code != 0:
                    return False, f"{cmd} exited {code}"
        same_csv = (outs[0] / "features.csv").read_bytes() == (outs[1] / "features.csv").read_bytes()
        docs = [json.loads((o / "report.json").read_text()) for o in outs]
        for d in docs:
            d.pop("timing", None)
        same_report = json.dumps(docs[0]) == json.dumps(docs[1])
    return same_csv and same_report, (f"features.csv {'identical' if same_csv else 'DIFFER'}, "
                                      f"report.json without timing {'identical' if same_report else 'DIFFER'}")


CRITERIA = [
    (1, "DFT oracle equivalence", check_1),
    (2, "Parseval", check_2),
    (3, "analytic sinusoid suite", check_3),
    (4, "scale invariance", check_4),
    (5, "CI reproduction", check_5),
    (6, "dataset shape", check_6),
    (7, "hold-out classification", check_7),
    (8, "AUC oracle", check_8),
    (9, "SMO correctness", check_9),
    (10, "monitor properties", check_10),
    (11, "descriptor ordering", check_11),
    (12, "determinism", check_12),
]


def _line(n, name, ok, detail):
    return f"ACCEPT #{n:<2} {name}: {'PASS' if ok else 'FAIL'} -- {detail}"


@pytest.mark.parametrize("n,name,check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(n, name, check):
    import conftest
    ok, detail = check()
    line = _line(n, name, ok, detail)
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for n, name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(n, name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
