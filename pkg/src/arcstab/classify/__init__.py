"""Classifiers operating on standardized feature vectors."""

from .dataset import Dataset, Standardizer, fit_standardizer
from .model import (BaggedParams, Hyperparams, KnnParams, ModelKind, SvmParams, TrainedModel,
                    TreeParams, svm_kkt_report, train)
from .svm import ConvergenceError, kkt_residuals, rbf_kernel, smo

__all__ = [
    "Dataset",
    "Standardizer",
    "fit_standardizer",
    "Hyperparams",
    "SvmParams",
    "KnnParams",
    "TreeParams",
    "BaggedParams",
    "ModelKind",
    "TrainedModel",
    "train",
    "svm_kkt_report",
    "smo",
    "rbf_kernel",
    "kkt_residuals",
    "ConvergenceError",
]
