"""
Hold-out comparison of the classifier suite
============================================

Train the RBF SVM and the three baselines on a stratified 75/25 split of the
default dataset and compare accuracy, macro F1 and one-vs-rest AUC.
"""

from arcstab import Dataset, extract, synthesize_dataset_trace
from arcstab.evaluation import binomial_ci, cross_validate, evaluate_holdout, split_holdout

rows = extract(synthesize_dataset_trace(seed=0))
ds = Dataset.from_vectors([v for _, v in rows], [f.label for f, _ in rows])
train_ds, test_ds = split_holdout(ds, test_fraction=0.25, seed=42)
print(f"train {len(train_ds)}, test {len(test_ds)}")

for kind in ("svm", "knn", "tree", "bagged"):
    report, _ = evaluate_holdout(train_ds, test_ds, kind)
    m = report.metrics
    aucs = ", ".join(f"{c.value[:4]} {cur.auc:.3f}" for c, cur in report.roc.items())
    print(f"{report.kind.value:<7} acc {m.accuracy:.3f}  macro-F1 {m.macro_f1:.3f}  AUC {aucs}")

###############################################################################
# Ten-fold stratified cross-validation gives the mean and spread, and the
# Wald interval puts an error bar on a single accuracy figure.

cv = cross_validate(ds, "kfold", k=10, seed=0)
print(f"\n10-fold SVM accuracy: {cv}")
lo, hi = binomial_ci(cv.mean, len(ds))
print(f"95% interval on {len(ds)} windows: [{lo:.3f}, {hi:.3f}]")
