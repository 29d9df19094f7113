"""Classifier suite: RBF-kernel SVM (one-vs-rest), k-NN, CART and bagged trees.

Every model z-scores its inputs with a :class:`Standardizer` fitted on the
training set.  ``predict`` returns one score per class in
:data:`~arcstab.signal.CLASS_ORDER`; the label is the first maximal score, so
ties resolve as Transient < Stable < Extinction.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..features import FeatureVector
from ..signal import CLASS_ORDER, RegimeLabel, make_rng
from .dataset import Dataset, Standardizer, fit_standardizer
from .svm import kkt_residuals, rbf_kernel, smo
from .tree import TreeArrays, fit_bagged, fit_tree

MODEL_FORMAT = "arcstab-model"
MODEL_VERSION = 1


class ModelKind(str, Enum):
    SVM_RBF = "SvmRbf"
    KNN = "Knn"
    TREE = "Tree"
    BAGGED = "Bagged"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"svm": cls.SVM_RBF, "svmrbf": cls.SVM_RBF, "knn": cls.KNN,
                   "tree": cls.TREE, "decisiontree": cls.TREE, "bagged": cls.BAGGED,
                   "ensemble": cls.BAGGED}
        if text in aliases:
            return aliases[text]
        raise ValueError(f"unknown model kind {value!r}")


@dataclass(frozen=True)
class SvmParams:
    C: float = 10.0
    gamma: float | None = None  # None -> 1 / n_features after masking
    tol: float = 1e-3
    max_passes: int = 1000


@dataclass(frozen=True)
class KnnParams:
    k: int = 3


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: int = 1


@dataclass(frozen=True)
class BaggedParams:
    n_trees: int = 30
    bootstrap_fraction: float = 1.0
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 0


@dataclass(frozen=True)
class Hyperparams:
    svm: SvmParams = field(default_factory=SvmParams)
    knn: KnnParams = field(default_factory=KnnParams)
    tree: TreeParams = field(default_factory=TreeParams)
    bagged: BaggedParams = field(default_factory=BaggedParams)

    def __post_init__(self):
        if self.svm.C <= 0:
            raise ValueError("C must be > 0")
        if self.svm.gamma is not None and self.svm.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.knn.k < 1 or self.knn.k % 2 == 0:
            raise ValueError("k must be odd and >= 1")
        if self.bagged.n_trees < 1 or not 0 < self.bagged.bootstrap_fraction <= 1:
            raise ValueError("bagged needs n_trees >= 1 and 0 < bootstrap_fraction <= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "Hyperparams":
        d = d or {}
        parts = {"svm": SvmParams, "knn": KnnParams, "tree": TreeParams, "bagged": BaggedParams}
        unknown = set(d) - set(parts)
        if unknown:
            raise ValueError(f"unknown hyperparameter sections: {sorted(unknown)}")
        kwargs = {}
        for name, klass in parts.items():
            sub = d.get(name, {})
            bad = set(sub) - {f.name for f in dataclasses.fields(klass)}
            if bad:
                raise ValueError(f"unknown {name} hyperparameters: {sorted(bad)}")
            kwargs[name] = klass(**sub)
        return cls(**kwargs)


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier.  Immutable; safe to share for prediction."""

    kind: ModelKind
    standardizer: Standardizer
    params: dict
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    feature_names: tuple[str, ...] = ()
    classes: tuple[RegimeLabel, ...] = CLASS_ORDER
    calibration: dict = field(default_factory=dict)

    def decision_function(self, X) -> np.ndarray:
        """Per-class scores, shape ``(n, 3)`` (or ``(3,)`` for one vector)."""
        X = _as_matrix(X)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if not np.all(np.isfinite(X2)):
            raise ValueError("feature vector contains non-finite values")
        Z = self.standardizer.apply(X2)
        scores = _SCORERS[self.kind](self, Z)
        return scores[0] if single else scores

    def predict(self, v) -> tuple[RegimeLabel, np.ndarray]:
        """Label and per-class scores of a single feature vector."""
        scores = self.decision_function(v)
        return self.classes[int(np.argmax(scores))], scores

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(np.atleast_2d(_as_matrix(X))), axis=1)

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "classes": [c.value for c in self.classes],
            "feature_names": list(self.feature_names),
            "standardizer": self.standardizer.to_dict(),
            "hyperparams": self.hyperparams.to_dict(),
            "params": _params_to_json(self.kind, self.params),
            "calibration": dict(self.calibration),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not an arcstab model document")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        kind = ModelKind.parse(d["kind"])
        return cls(kind, Standardizer.from_dict(d["standardizer"]),
                   _params_from_json(kind, d["params"]), Hyperparams.from_dict(d["hyperparams"]),
                   tuple(d["feature_names"]), tuple(RegimeLabel.parse(c) for c in d["classes"]),
                   dict(d.get("calibration", {})))

    def save(self, path: str | Path, extra: dict | None = None) -> Path:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")
        return Path(path)

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_calibration(self, **values) -> "TrainedModel":
        return dataclasses.replace(self, calibration={**self.calibration, **values})


def _as_matrix(X):
    if isinstance(X, FeatureVector):
        return X.as_array()
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], FeatureVector):
        return np.array([v.as_array() for v in X])
    return np.asarray(X, dtype=np.float64)


# -- training -----------------------------------------------------------------


def _check_trainable(ds: Dataset):
    if len(ds) == 0:
        raise ValueError("empty training set")
    if len(np.unique(ds.y)) < 2:
        raise ValueError("training needs at least two classes")


def train(ds: Dataset, kind: ModelKind | str = ModelKind.SVM_RBF,
          hp: Hyperparams | None = None) -> TrainedModel:
    """Fit one classifier of ``kind`` on ``ds``."""
    kind = ModelKind.parse(kind)
    hp = hp or Hyperparams()
    _check_trainable(ds)
    std = fit_standardizer(ds)
    Z = std.apply(ds.X)
    params = _TRAINERS[kind](Z, ds.y, hp)
    return TrainedModel(kind, std, params, hp, ds.feature_names)


def _train_svm(Z, y, hp):
    p = hp.svm
    gamma = p.gamma if p.gamma is not None else 1.0 / Z.shape[1]
    # solve on rows in a canonical order so the SMO pivot sequence does not
    # depend on how the training set happens to be ordered
    order = np.lexsort((y,) + tuple(Z[:, j] for j in reversed(range(Z.shape[1]))))
    Z, y = Z[order], np.asarray(y)[order]
    K = rbf_kernel(Z, Z, gamma)
    n_classes = len(CLASS_ORDER)
    alphas, biases, signs = [], [], []
    for c in range(n_classes):
        yc = np.where(y == c, 1.0, -1.0)
        if np.all(yc < 0):
            # absent class: constant score below any real decision value
            alphas.append(np.zeros(len(y)))
            biases.append(-np.inf)
        else:
            sol = smo(K, yc, p.C, p.tol, max_iter=p.max_passes * max(len(y), 100))
            alphas.append(sol.alpha)
            biases.append(sol.bias)
        signs.append(yc)
    alphas = np.array(alphas)
    signs = np.array(signs)
    sv = np.flatnonzero(np.any(alphas > 0, axis=0))
    return {
        "gamma": float(gamma),
        "C": float(p.C),
        "support_vectors": Z[sv],
        "support_index": order[sv],
        "dual_coef": (alphas * signs)[:, sv],
        "intercept": np.array(biases),
    }


def _train_knn(Z, y, hp):
    return {"k": hp.knn.k, "X": Z.copy(), "y": np.asarray(y).copy()}


def _train_tree(Z, y, hp):
    return {"tree": fit_tree(Z, np.asarray(y), len(CLASS_ORDER), hp.tree.max_depth, hp.tree.min_leaf)}


def _train_bagged(Z, y, hp):
    b = hp.bagged
    trees = fit_bagged(Z, np.asarray(y), len(CLASS_ORDER), b.n_trees, b.bootstrap_fraction,
                       make_rng(b.seed), b.max_depth, b.min_leaf)
    return {"trees": trees}


_TRAINERS = {
    ModelKind.SVM_RBF: _train_svm,
    ModelKind.KNN: _train_knn,
    ModelKind.TREE: _train_tree,
    ModelKind.BAGGED: _train_bagged,
}


# -- scoring ------------------------------------------------------------------


def _score_svm(model, Z):
    p = model.params
    K = rbf_kernel(Z, p["support_vectors"], p["gamma"])
    return K @ p["dual_coef"].T + p["intercept"]


def _score_knn(model, Z):
    p = model.params
    X, y, k = p["X"], p["y"], p["k"]
    k = min(k, len(y))
    out = np.zeros((len(Z), len(CLASS_ORDER)))
    for r, z in enumerate(Z):
        d2 = ((X - z) ** 2).sum(axis=1)
        # equal distances fall back to label, then to coordinates, never to row order
        keys = tuple(X[:, j] for j in reversed(range(X.shape[1]))) + (y, d2)
        nearest = np.lexsort(keys)[:k]
        out[r] = np.bincount(y[nearest], minlength=len(CLASS_ORDER)) / k
    return out


def _score_tree(model, Z):
    return model.params["tree"].apply(Z)


def _score_bagged(model, Z):
    trees = model.params["trees"]
    return sum(t.apply(Z) for t in trees) / len(trees)


_SCORERS = {
    ModelKind.SVM_RBF: _score_svm,
    ModelKind.KNN: _score_knn,
    ModelKind.TREE: _score_tree,
    ModelKind.BAGGED: _score_bagged,
}


def _params_to_json(kind, p):
    if kind is ModelKind.SVM_RBF:
        return {"gamma": p["gamma"], "C": p["C"],
                "support_vectors": p["support_vectors"].tolist(),
                "support_index": p["support_index"].tolist(),
                "dual_coef": p["dual_coef"].tolist(),
                "intercept": [None if not np.isfinite(b) else b for b in p["intercept"]]}
    if kind is ModelKind.KNN:
        return {"k": p["k"], "X": p["X"].tolist(), "y": p["y"].tolist()}
    if kind is ModelKind.TREE:
        return {"tree": p["tree"].to_dict()}
    return {"trees": [t.to_dict() for t in p["trees"]]}


def _params_from_json(kind, d):
    if kind is ModelKind.SVM_RBF:
        n_sv = len(d["support_index"])
        return {"gamma": float(d["gamma"]), "C": float(d["C"]),
                "support_vectors": np.array(d["support_vectors"], float).reshape(n_sv, -1),
                "support_index": np.array(d["support_index"], int),
                "dual_coef": np.array(d["dual_coef"], float).reshape(-1, n_sv),
                "intercept": np.array([-np.inf if b is None else b for b in d["intercept"]], float)}
    if kind is ModelKind.KNN:
        X = np.array(d["X"], float)
        return {"k": int(d["k"]), "X": X, "y": np.array(d["y"], int)}
    if kind is ModelKind.TREE:
        return {"tree": TreeArrays.from_dict(d["tree"])}
    return {"trees": [TreeArrays.from_dict(t) for t in d["trees"]]}


def svm_kkt_report(model: TrainedModel, train_ds: Dataset) -> list[dict]:
    """KKT residuals and the equality-constraint sum for every binary machine.

    Decision values are recomputed from the stored support vectors, so this
    doubles as a consistency check on the fitted model.
    """
    if model.kind is not ModelKind.SVM_RBF:
        raise ValueError("KKT report only applies to SVM models")
    p = model.params
    Z = model.standardizer.apply(train_ds.X)
    scores = _score_svm(model, Z)
    out = []
    for c in range(len(model.classes)):
        yc = np.where(train_ds.y == c, 1.0, -1.0)
        alpha = np.zeros(len(yc))
        alpha[p["support_index"]] = np.abs(p["dual_coef"][c])
        if not np.isfinite(p["intercept"][c]):
            continue
        res = kkt_residuals(alpha, yc, scores[:, c], p["C"])
        out.append({"class": model.classes[c].value,
                    "max_kkt_residual": float(res.max()),
                    "sum_alpha_y": float(np.sum(alpha * yc)),
                    "n_support": int(np.count_nonzero(alpha))})
    return out
