"""Validation protocols and summary statistics.

Hold-out and k-fold splits are stratified by class and seeded; ROC and PR
curves come from one threshold sweep per class (one-vs-rest); accuracy
intervals use the normal approximation unless Wilson is requested.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .classify import Dataset, Hyperparams, ModelKind, train
from .signal import CLASS_ORDER, RegimeLabel, make_rng

__all__ = [
    "holdout_indices",
    "split_holdout",
    "kfold_indices",
    "loo_indices",
    "CvSummary",
    "cross_validate",
    "Metrics",
    "confusion_and_metrics",
    "Curve",
    "roc_curve",
    "roc_curves",
    "pr_curve",
    "pr_curves",
    "mann_whitney_auc",
    "binomial_ci",
    "fisher_criterion",
    "fisher_table",
    "permutation_importance",
    "grid_search_svm",
    "EvalReport",
    "evaluate_holdout",
]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _as_labels(seq) -> np.ndarray:
    out = []
    for v in seq:
        if isinstance(v, (int, np.integer)):
            out.append(int(v))
        else:
            out.append(RegimeLabel.parse(v).index)
    return np.asarray(out, dtype=np.int64)


# -- splits -------------------------------------------------------------------


def holdout_indices(y, test_fraction: float = 0.25, seed: int = 42,
                    stratified: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Sorted ``(train, test)`` index arrays.

    With ``stratified`` each class contributes ``round(fraction * count)``
    test samples (halves round up), drawn by a seeded permutation.
    """
    y = np.asarray(y)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = make_rng(seed)
    if stratified:
        test = []
        for c in np.unique(y):
            members = np.flatnonzero(y == c)
            n_test = _round_half_up(test_fraction * len(members))
            if n_test < 1 or n_test >= len(members):
                raise ValueError(f"test fraction {test_fraction} leaves class {c} empty "
                                 f"in one split ({len(members)} samples)")
            test.append(rng.permutation(members)[:n_test])
        test = np.sort(np.concatenate(test)) if test else np.array([], int)
    else:
        n_test = _round_half_up(test_fraction * len(y))
        if n_test < 1 or n_test >= len(y):
            raise ValueError(f"test fraction {test_fraction} leaves one split empty")
        test = np.sort(rng.permutation(len(y))[:n_test])
    train_idx = np.setdiff1d(np.arange(len(y)), test)
    return train_idx, test


def split_holdout(ds: Dataset, test_fraction: float = 0.25, seed: int = 42,
                  stratified: bool = True) -> tuple[Dataset, Dataset]:
    tr, te = holdout_indices(ds.y, test_fraction, seed, stratified)
    return ds.subset(tr), ds.subset(te)


def kfold_indices(y, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Stratified folds: each class is shuffled then dealt round-robin.

    Dealing continues across class boundaries, so fold sizes differ by at
    most one (14 or 15 for 147 samples and ``k = 10``).
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k-fold needs k >= 2")
    counts = np.bincount(y) if len(y) else np.array([0])
    present = counts[counts > 0]
    if len(present) == 0 or k > present.min():
        raise ValueError(f"k={k} exceeds the smallest class count ({present.min() if len(present) else 0})")
    rng = make_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    folds = [order[i::k] for i in range(k)]
    return [np.sort(f) for f in folds]


def loo_indices(n: int) -> list[np.ndarray]:
    if n < 2:
        raise ValueError("leave-one-out needs at least two samples")
    return [np.array([i]) for i in range(n)]


# -- metrics ------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    confusion: np.ndarray  # rows = truth, cols = predicted
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))

    def to_dict(self) -> dict:
        names = [c.value for c in CLASS_ORDER]
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "per_class": {n: {"precision": float(p), "recall": float(r), "f1": float(f)}
                          for n, p, r, f in zip(names, self.precision, self.recall, self.f1)},
            "macro_f1": self.macro_f1,
        }


def confusion_and_metrics(truth, pred, n_classes: int = len(CLASS_ORDER)) -> Metrics:
    """Confusion matrix with per-class precision, recall and F1.

    A class that is never predicted has precision 0; one absent from the
    truth has recall 0; F1 is 0 whenever ``P + R == 0``.
    """
    t = _as_labels(truth)
    p = _as_labels(pred)
    if len(t) != len(p):
        raise ValueError(f"{len(t)} truth labels but {len(p)} predictions")
    if len(t) == 0:
        raise ValueError("no labels to score")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    tp = np.diag(cm).astype(float)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    precision = np.divide(tp, col, out=np.zeros(n_classes), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros(n_classes), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_classes), where=denom > 0)
    return Metrics(cm, float(tp.sum() / len(t)), precision, recall, f1)


# -- curves -------------------------------------------------------------------


@dataclass(frozen=True)
class Curve:
    """Operating points of one class, ordered by decreasing threshold.

    ``x``/``y`` are FPR/TPR for ROC and recall/precision for PR.  ``auc``
    is None when the truth holds only one of positive/negative.
    """

    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray
    auc: float | None = None

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(),
                "thresholds": [None if not np.isfinite(t) else float(t) for t in self.thresholds],
                "auc": self.auc}


def _sweep(scores, positive):
    """Cumulative TP/FP counts when predicting positive for ``score >= t``."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    if len(s) != len(pos):
        raise ValueError("scores and truth differ in length")
    if np.any(np.isnan(s)):
        raise ValueError("scores must not be NaN")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tp = np.cumsum(pos)[ends]
    fp = np.cumsum(~pos)[ends]
    return s[ends], tp, fp, int(pos.sum()), int((~pos).sum())


def roc_curve(scores, positive) -> Curve:
    thr, tp, fp, P, N = _sweep(scores, positive)
    if P == 0 or N == 0:
        return Curve(np.array([]), np.array([]), np.array([]), None)
    fp0, tp0 = np.r_[0, fp], np.r_[0, tp]
    # trapezoid rule in integer counts, scaled once at the end
    auc = float(np.sum(np.diff(fp0) * (tp0[1:] + tp0[:-1])) / (2 * P * N))
    fpr, tpr = fp0 / N, tp0 / P
    return Curve(fpr, tpr, np.r_[np.inf, thr], auc)


def pr_curve(scores, positive) -> Curve:
    """Precision against recall; the zero-recall anchor has precision 1."""
    thr, tp, fp, P, N = _sweep(scores, positive)
    if P == 0 or N == 0:
        return Curve(np.array([]), np.array([]), np.array([]), None)
    recall = np.r_[0.0, tp / P]
    precision = np.r_[1.0, tp / (tp + fp)]
    # step-wise average precision
    ap = float(np.sum(np.diff(recall) * precision[1:]))
    return Curve(recall, precision, np.r_[np.inf, thr], ap)


def _per_class(fn, scores, truth):
    S = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    t = _as_labels(truth)
    if S.shape[0] != len(t):
        raise ValueError("one score row per sample is required")
    return {c: fn(S[:, c.index], t == c.index) for c in CLASS_ORDER[:S.shape[1]]}


def roc_curves(scores, truth) -> dict[RegimeLabel, Curve]:
    """One-vs-rest ROC per class from an ``(n, n_classes)`` score matrix."""
    return _per_class(roc_curve, scores, truth)


def pr_curves(scores, truth) -> dict[RegimeLabel, Curve]:
    return _per_class(pr_curve, scores, truth)


def mann_whitney_auc(scores, positive) -> float:
    """Probability a positive outscores a negative; ties count one half."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    a, b = s[pos], s[~pos]
    if not len(a) or not len(b):
        raise ValueError("need both positives and negatives")
    diff = a[:, None] - b[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


# -- intervals and separability ----------------------------------------------


def binomial_ci(accuracy: float, n: int, level: float = 0.95,
                method: str = "wald") -> tuple[float, float]:
    """Two-sided interval for a proportion, clamped to [0, 1]."""
    if not 0 <= accuracy <= 1:
        raise ValueError("accuracy must be in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    p = accuracy
    if method == "wald":
        half = z * math.sqrt(p * (1 - p) / n)
        lo, hi = p - half, p + half
    elif method == "wilson":
        z2 = z * z
        centre = (p + z2 / (2 * n)) / (1 + z2 / n)
        half = z / (1 + z2 / n) * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
        lo, hi = centre - half, centre + half
    else:
        raise ValueError(f"unknown interval method {method!r}")
    return max(0.0, lo), min(1.0, hi)


def fisher_criterion(ds: Dataset, class_a, class_b, per_feature: bool = False):
    """``||mu_a - mu_b||^2 / Tr(S_a + S_b)`` with population covariances.

    With ``per_feature`` the ratio is returned for every column separately
    (columns where both classes are constant give ``nan``).
    """
    a = RegimeLabel.parse(class_a).index
    b = RegimeLabel.parse(class_b).index
    Xa, Xb = ds.X[ds.y == a], ds.X[ds.y == b]
    if len(Xa) < 2 or len(Xb) < 2:
        raise ValueError("each class needs at least two samples")
    d2 = (Xa.mean(0) - Xb.mean(0)) ** 2
    spread = Xa.var(0) + Xb.var(0)
    if per_feature:
        return np.divide(d2, spread, out=np.full(len(d2), np.nan), where=spread > 0)
    tr = spread.sum()
    if tr <= 0:
        raise ValueError("both classes are constant; Fisher ratio undefined")
    return float(d2.sum() / tr)


def fisher_table(ds: Dataset) -> dict[str, float]:
    out = {}
    for i, a in enumerate(CLASS_ORDER):
        for b in CLASS_ORDER[i + 1:]:
            out[f"{a.value}/{b.value}"] = fisher_criterion(ds, a, b)
    return out


# -- model-dependent ----------------------------------------------------------


def permutation_importance(model, test: Dataset, repeats: int = 10,
                           seed: int = 0) -> list[tuple[str, float]]:
    """Mean accuracy drop when one column is shuffled, sorted descending.

    ``model`` needs only a ``predict_many(X) -> class indices`` method.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    rng = make_rng(seed)
    X = np.array(test.X)
    base = float(np.mean(model.predict_many(X) == test.y))
    scores = []
    for j, name in enumerate(test.feature_names):
        drops = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            drops.append(base - float(np.mean(model.predict_many(Xp) == test.y)))
        scores.append((name, float(np.mean(drops))))
    # stable sort keeps column order among equal scores
    return sorted(scores, key=lambda kv: -kv[1])


@dataclass(frozen=True)
class CvSummary:
    scheme: str
    fold_accuracy: tuple[float, ...]
    folds: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracy))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracy))

    def __str__(self) -> str:
        return f"{100 * self.mean:.1f} ± {100 * self.std:.1f}"

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "mean": self.mean, "std": self.std,
                "fold_accuracy": list(self.fold_accuracy)}


def _fold_hyperparams(hp: Hyperparams, seed: int, fold: int) -> Hyperparams:
    fold_seed = int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])
    return dataclasses.replace(hp, bagged=dataclasses.replace(hp.bagged, seed=fold_seed))


def cross_validate(ds: Dataset, scheme: str = "kfold", k: int = 10,
                   kind: ModelKind | str = ModelKind.SVM_RBF, hp: Hyperparams | None = None,
                   seed: int = 0, fit: Callable[[Dataset], object] | None = None) -> CvSummary:
    """Accuracy per held-out fold.

    Parameters
    ----------
    scheme : {"kfold", "loo"}
    fit : callable, optional
        ``fit(train_ds)`` returning anything with ``predict_many``.  Defaults
        to :func:`arcstab.classify.train` with ``kind`` and ``hp``; the bagged
        seed is then derived from ``(seed, fold)``.
    """
    hp = hp or Hyperparams()
    if scheme == "kfold":
        folds = kfold_indices(ds.y, k, seed)
    elif scheme == "loo":
        folds = loo_indices(len(ds))
    else:
        raise ValueError(f"unknown CV scheme {scheme!r}")
    acc = []
    every = np.arange(len(ds))
    for i, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(every, test_idx)
        tr = ds.subset(train_idx)
        model = fit(tr) if fit else train(tr, kind, _fold_hyperparams(hp, seed, i))
        pred = model.predict_many(ds.X[test_idx])
        acc.append(float(np.mean(pred == ds.y[test_idx])))
    return CvSummary(scheme, tuple(acc), tuple(tuple(int(j) for j in f) for f in folds))


SVM_GRID_C = (1.0, 10.0, 100.0)
SVM_GRID_GAMMA = (0.05, 0.1, 0.5)


def grid_search_svm(ds: Dataset, C_grid: Sequence[float] = SVM_GRID_C,
                    gamma_grid: Sequence[float] = SVM_GRID_GAMMA, k: int = 5,
                    seed: int = 0, base: Hyperparams | None = None):
    """Pick ``(C, gamma)`` by inner stratified k-fold accuracy.

    Returns the chosen :class:`Hyperparams` and the table of
    ``(C, gamma, mean accuracy)``; ties keep the earliest grid point.
    """
    base = base or Hyperparams()
    table = []
    best = None
    for C in C_grid:
        for g in gamma_grid:
            hp = dataclasses.replace(base, svm=dataclasses.replace(base.svm, C=float(C), gamma=float(g)))
            cv = cross_validate(ds, "kfold", k, ModelKind.SVM_RBF, hp, seed)
            table.append((float(C), float(g), cv.mean))
            if best is None or cv.mean > best[1]:
                best = (hp, cv.mean)
    return best[0], table


# -- report -------------------------------------------------------------------


@dataclass
class EvalReport:
    """Everything measured on one hold-out split.

    ``timing`` is kept apart from the deterministic content so reports can be
    compared byte for byte with it removed.
    """

    kind: ModelKind
    metrics: Metrics
    roc: dict
    pr: dict
    ci: tuple[float, float, float]
    n_test: int
    cv: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_dict(self, with_timing: bool = True) -> dict:
        doc = {
            "model": self.kind.value,
            "n_test": self.n_test,
            **self.metrics.to_dict(),
            "roc": {c.value: v.to_dict() for c, v in self.roc.items()},
            "pr": {c.value: v.to_dict() for c, v in self.pr.items()},
            "ci": {"low": self.ci[0], "high": self.ci[1], "level": self.ci[2]},
            "cv": {name: s.to_dict() for name, s in self.cv.items()},
            **self.extra,
        }
        if with_timing:
            doc["timing"] = dict(self.timing)
        return doc

    def write_curves(self, out_dir: str | Path, prefix: str = "") -> list[Path]:
        """One CSV per curve family: ``class,x,y,threshold`` rows."""
        out_dir = Path(out_dir)
        written = []
        for name, curves, cols in (("roc", self.roc, ("fpr", "tpr")),
                                   ("pr", self.pr, ("recall", "precision"))):
            path = out_dir / f"{prefix}{name}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["class", *cols, "threshold"])
                for c, curve in curves.items():
                    for x, y, t in zip(curve.x, curve.y, curve.thresholds):
                        w.writerow([c.value, repr(float(x)), repr(float(y)),
                                    "" if not np.isfinite(t) else repr(float(t))])
            written.append(path)
        return written


def evaluate_holdout(train_ds: Dataset, test_ds: Dataset, kind: ModelKind | str = ModelKind.SVM_RBF,
                     hp: Hyperparams | None = None, level: float = 0.95,
                     ci_method: str = "wald") -> tuple[EvalReport, object]:
    """Train on ``train_ds``, score ``test_ds``; returns the report and the model."""
    kind = ModelKind.parse(kind)
    t0 = time.perf_counter()
    model = train(train_ds, kind, hp)
    t_train = time.perf_counter() - t0
    t0 = time.perf_counter()
    scores = model.decision_function(test_ds.X)
    t_inf = (time.perf_counter() - t0) / max(len(test_ds), 1)
    pred = np.argmax(scores, axis=1)
    m = confusion_and_metrics(test_ds.y, pred)
    lo, hi = binomial_ci(m.accuracy, len(test_ds), level, ci_method)
    report = EvalReport(kind, m, roc_curves(scores, test_ds.y), pr_curves(scores, test_ds.y),
                        (lo, hi, level), len(test_ds),
                        timing={"train_s": t_train, "inference_per_sample_s": t_inf})
    return report, model
