import csv
import json
import math

import numpy as np
import pytest

from arcstab.classify import Dataset, train
from arcstab.evaluation import (CvSummary, binomial_ci, confusion_and_metrics, cross_validate,
                                evaluate_holdout, fisher_criterion, fisher_table, grid_search_svm,
                                holdout_indices, kfold_indices, loo_indices, mann_whitney_auc,
                                permutation_importance, pr_curve, roc_curve, roc_curves,
                                split_holdout)
from arcstab.signal import RegimeLabel

T, S, E = RegimeLabel.TRANSIENT, RegimeLabel.STABLE, RegimeLabel.EXTINCTION


class Perfect:
    """Stub that looks up the true label of every row of ``ds``."""

    def __init__(self, ds):
        self.lookup = {tuple(x): int(c) for x, c in zip(ds.X, ds.y)}

    def predict_many(self, X):
        return np.array([self.lookup[tuple(x)] for x in X])


class Constant:
    def predict_many(self, X):
        return np.ones(len(X), dtype=int)


def one_d(values_a, values_b):
    X = np.array(list(values_a) + list(values_b), float)[:, None]
    y = [0] * len(values_a) + [1] * len(values_b)
    return Dataset(X, y, ("x",))


class TestSplits:
    def test_default_holdout_sizes(self, default_ds):
        tr, te = split_holdout(default_ds, 0.25, 42)
        assert len(te) == 36 and len(tr) == 111
        assert te.class_counts() == {T: 12, S: 12, E: 12}

    def test_two_samples(self):
        tr, te = holdout_indices([0, 0], 0.5, 1)
        assert len(tr) == 1 and len(te) == 1

    def test_deterministic(self, default_ds):
        a = holdout_indices(default_ds.y, 0.25, 42)
        b = holdout_indices(default_ds.y, 0.25, 42)
        c = holdout_indices(default_ds.y, 0.25, 43)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not np.array_equal(a[1], c[1])

    def test_disjoint_cover(self, default_ds):
        tr, te = holdout_indices(default_ds.y)
        assert np.array_equal(np.sort(np.r_[tr, te]), np.arange(147))

    @pytest.mark.parametrize("frac", [0.0, 1.0, 0.01])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            holdout_indices(np.repeat([0, 1, 2], 49), frac)

    def test_kfold_partition(self, default_ds):
        folds = kfold_indices(default_ds.y, 10, 0)
        sizes = sorted(len(f) for f in folds)
        assert set(sizes) <= {14, 15}
        allidx = np.concatenate(folds)
        assert len(allidx) == 147 and np.array_equal(np.sort(allidx), np.arange(147))

    def test_kfold_stratified(self, default_ds):
        for f in kfold_indices(default_ds.y, 10, 3):
            counts = np.bincount(default_ds.y[f], minlength=3)
            assert counts.max() - counts.min() <= 1

    def test_kfold_errors(self):
        with pytest.raises(ValueError):
            kfold_indices([0, 1, 0, 1], 1)
        with pytest.raises(ValueError):
            kfold_indices([0, 1, 0, 1], 3)

    def test_loo(self):
        folds = loo_indices(7)
        assert len(folds) == 7
        assert np.array_equal(np.concatenate(folds), np.arange(7))


class TestCv:
    def test_perfect_stub(self, default_ds):
        cv = cross_validate(default_ds, "kfold", 10, fit=lambda tr: Perfect(default_ds))
        assert cv.mean == 1.0 and cv.std == 0.0

    def test_loo_fold_count(self, default_ds):
        sub = default_ds.subset(np.r_[0:10, 60:70, 120:130])
        cv = cross_validate(sub, "loo", fit=lambda tr: Perfect(sub))
        assert len(cv.fold_accuracy) == 30

    def test_format(self):
        cv = CvSummary("kfold", (0.8, 1.0))
        assert str(cv) == "90.0 ± 10.0"
        assert cv.to_dict()["std"] == pytest.approx(0.1)

    def test_svm_kfold_deterministic(self, default_ds):
        a = cross_validate(default_ds, "kfold", 5, seed=1)
        b = cross_validate(default_ds, "kfold", 5, seed=1)
        assert a.fold_accuracy == b.fold_accuracy
        assert a.mean >= 0.8

    def test_unknown_scheme(self, default_ds):
        with pytest.raises(ValueError):
            cross_validate(default_ds, "bootstrap")

    def test_grid_search(self, default_ds):
        hp, table = grid_search_svm(default_ds, (1.0, 10.0), (0.1,), k=3)
        assert len(table) == 2
        best = max(table, key=lambda r: r[2])
        assert hp.svm.C == best[0] and hp.svm.gamma == 0.1


class TestMetrics:
    def test_identity(self):
        truth = [0, 1, 2, 2, 1, 0]
        m = confusion_and_metrics(truth, truth)
        assert np.array_equal(m.confusion, np.diag([2, 2, 2]))
        assert m.accuracy == 1.0 and np.all(m.f1 == 1.0) and m.macro_f1 == 1.0

    def test_34_of_36(self):
        truth = np.repeat([0, 1, 2], 12)
        pred = truth.copy()
        pred[[12, 13]] = 2
        m = confusion_and_metrics(truth, pred)
        assert m.accuracy == pytest.approx(34 / 36)
        assert round(100 * m.accuracy, 1) == 94.4
        assert np.array_equal(m.confusion.sum(axis=1), [12, 12, 12])
        assert m.recall[1] == pytest.approx(10 / 12)
        assert np.trace(m.confusion) / m.confusion.sum() == m.accuracy

    def test_all_wrong(self):
        m = confusion_and_metrics(["Transient"] * 5, ["Stable"] * 5)
        assert m.recall[0] == 0 and m.precision[1] == 0
        assert m.f1[0] == 0 and m.f1[1] == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion_and_metrics([0, 1], [0])

    def test_rates_bounded(self, rng):
        t, p = rng.integers(0, 3, 100), rng.integers(0, 3, 100)
        m = confusion_and_metrics(t, p)
        for v in (m.precision, m.recall, m.f1):
            assert np.all((v >= 0) & (v <= 1))
        assert np.allclose(m.recall, np.diag(m.confusion) / m.confusion.sum(axis=1))


class TestCurves:
    def test_perfect(self):
        s = np.r_[np.linspace(1, 2, 10), np.linspace(-2, -1, 10)]
        pos = np.r_[np.ones(10, bool), np.zeros(10, bool)]
        assert roc_curve(s, pos).auc == 1.0
        pr = pr_curve(s, pos)
        assert np.all(pr.y[pr.x > 0][: 10] == 1.0)

    def test_identical_scores(self):
        c = roc_curve(np.zeros(10), np.arange(10) < 4)
        assert c.auc == 0.5
        assert np.array_equal(c.x, [0, 1]) and np.array_equal(c.y, [0, 1])

    def test_mann_whitney_random(self, rng):
        s = rng.standard_normal(1000)
        pos = rng.random(1000) < 0.3
        assert abs(roc_curve(s, pos).auc - mann_whitney_auc(s, pos)) <= 1e-9

    def test_mann_whitney_ties(self, rng):
        s = rng.integers(0, 5, 300).astype(float)
        pos = rng.random(300) < 0.5
        assert abs(roc_curve(s, pos).auc - mann_whitney_auc(s, pos)) <= 1e-9

    def test_monotone(self, rng):
        c = roc_curve(rng.standard_normal(200), rng.random(200) < 0.4)
        assert np.all(np.diff(c.x) >= 0) and np.all(np.diff(c.y) >= 0)
        assert (c.x[0], c.y[0]) == (0, 0) and (c.x[-1], c.y[-1]) == (1, 1)

    def test_inverted_pr(self):
        s = np.r_[np.zeros(5), np.ones(15)]
        pos = np.r_[np.ones(5, bool), np.zeros(15, bool)]
        pr = pr_curve(s, pos)
        assert pr.x[-1] == 1.0 and pr.y[-1] == pytest.approx(5 / 20)

    def test_pr_per_threshold_oracle(self, rng):
        s = np.round(rng.standard_normal(150), 1)
        pos = rng.random(150) < 0.35
        pr = pr_curve(s, pos)
        assert pr.y[0] == 1.0 and pr.x[0] == 0.0
        for r, p, t in zip(pr.x[1:], pr.y[1:], pr.thresholds[1:]):
            hit = s >= t
            assert p == np.sum(hit & pos) / np.sum(hit)
            assert r == np.sum(hit & pos) / np.sum(pos)

    def test_single_class_truth(self):
        assert roc_curve([0.1, 0.2], [True, True]).auc is None

    def test_per_class(self, svm_model, default_ds):
        curves = roc_curves(svm_model.decision_function(default_ds.X), default_ds.y)
        assert set(curves) == {T, S, E}
        assert all(c.auc >= 0.9 for c in curves.values())


class TestCi:
    def test_reference_value(self):
        lo, hi = binomial_ci(0.8707, 147, 0.95)
        assert lo == pytest.approx(0.8165, abs=5e-4)
        assert hi == pytest.approx(0.9250, abs=5e-4)

    def test_clamped(self):
        assert binomial_ci(1.0, 100) == (1.0, 1.0)

    def test_arithmetic(self):
        lo, hi = binomial_ci(0.5, 4)
        assert lo == pytest.approx(0.5 - 1.959964 * 0.25, abs=1e-6)
        assert hi == pytest.approx(0.99, abs=1e-3)

    def test_width_scaling(self):
        for p in (0.3, 0.5, 0.87):
            w1 = np.subtract(*binomial_ci(p, 100)[::-1])
            w4 = np.subtract(*binomial_ci(p, 400)[::-1])
            assert w4 == pytest.approx(w1 / 2, rel=1e-12)

    def test_wilson_inside_unit(self):
        lo, hi = binomial_ci(1.0, 10, method="wilson")
        assert 0 < lo < 1 and hi == pytest.approx(1.0)

    @pytest.mark.parametrize("args", [(1.2, 10), (0.5, 0), (0.5, 10, 1.0)])
    def test_ranges(self, args):
        with pytest.raises(ValueError):
            binomial_ci(*args)


class TestFisher:
    def test_identical(self):
        assert fisher_criterion(one_d([1, 2, 3], [1, 2, 3]), T, S) == 0.0

    def test_constant_classes(self):
        with pytest.raises(ValueError):
            fisher_criterion(one_d([0, 0], [0, 0]), T, S)

    def test_hand_arithmetic(self):
        # centroids 0 and 4, population variances 1 and 1
        assert fisher_criterion(one_d([-1, 1], [3, 5]), T, S) == pytest.approx(8.0)

    def test_per_feature(self, default_ds):
        per = fisher_criterion(default_ds, T, S, per_feature=True)
        assert per.shape == (10,)
        assert np.all(per[np.isfinite(per)] >= 0)

    def test_table(self, default_ds):
        table = fisher_table(default_ds)
        assert set(table) == {"Transient/Stable", "Transient/Extinction", "Stable/Extinction"}


class TestImportance:
    def test_noise_column(self, default_ds):
        noise = np.random.default_rng(11).standard_normal(len(default_ds))
        ds = default_ds.with_column("noise", noise)
        tr, te = split_holdout(ds)
        model = train(tr, "svm")
        scores = dict(permutation_importance(model, te, repeats=10, seed=0))
        assert abs(scores["noise"]) <= 0.05

    def test_constant_stub(self, default_ds):
        scores = permutation_importance(Constant(), default_ds, repeats=3)
        assert all(v == 0 for _, v in scores)
        assert [n for n, _ in scores] == list(default_ds.feature_names)

    def test_sorted(self, svm_model, default_ds):
        vals = [v for _, v in permutation_importance(svm_model, default_ds, repeats=3)]
        assert vals == sorted(vals, reverse=True)

    def test_duplicate_column(self, default_ds):
        tr, te = split_holdout(default_ds)
        base = dict(permutation_importance(train(tr, "svm"), te, repeats=10, seed=0))
        top = max(base, key=base.get)
        j = default_ds.feature_names.index(top)
        dup = default_ds.with_column(top + "_copy", default_ds.X[:, j])
        tr2, te2 = split_holdout(dup)
        scores = dict(permutation_importance(train(tr2, "svm"), te2, repeats=10, seed=0))
        assert scores[top] <= base[top] + 0.05
        assert scores[top + "_copy"] <= base[top] + 0.05
        assert scores[top] >= -0.05 and scores[top + "_copy"] >= -0.05

    def test_empty(self, svm_model, default_ds):
        with pytest.raises(ValueError):
            permutation_importance(svm_model, default_ds.subset([]))


class TestReport:
    def test_holdout_report(self, default_ds, tmp_path):
        tr, te = split_holdout(default_ds)
        report, model = evaluate_holdout(tr, te)
        doc = report.to_dict()
        assert doc["n_test"] == 36
        assert np.array_equal(np.sum(doc["confusion"], axis=1), [12, 12, 12])
        assert doc["ci"]["low"] <= doc["accuracy"] <= doc["ci"]["high"]
        assert set(doc["timing"]) == {"train_s", "inference_per_sample_s"}
        assert "timing" not in report.to_dict(with_timing=False)
        json.dumps(report.to_dict(with_timing=False), allow_nan=False)
        roc_csv, pr_csv = report.write_curves(tmp_path)
        rows = list(csv.DictReader(roc_csv.open()))
        assert {r["class"] for r in rows} == {"Transient", "Stable", "Extinction"}
        assert all(0 <= float(r["fpr"]) <= 1 for r in rows)

    def test_deterministic(self, default_ds):
        tr, te = split_holdout(default_ds)
        a = evaluate_holdout(tr, te)[0].to_dict(with_timing=False)
        b = evaluate_holdout(tr, te)[0].to_dict(with_timing=False)
        assert json.dumps(a) == json.dumps(b)

    def test_ci_matches_accuracy(self, default_ds):
        tr, te = split_holdout(default_ds)
        rep = evaluate_holdout(tr, te, "knn")[0]
        lo, hi = binomial_ci(rep.metrics.accuracy, 36)
        assert rep.ci[:2] == (lo, hi)
        assert math.isclose(rep.ci[2], 0.95)
