"""Feature table CSV: the interchange format between extraction and training.

Header::

    frame,asi,thd_arc,h_s,p50_n,p100_n,her,rms,cf,k,zcr,label

Values are written with ``repr`` so a reload reproduces every float exactly.
Unlabelled windows leave ``label`` empty.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import Dataset
from .features import FEATURE_NAMES, FeatureVector
from .signal import EmptyInputError, Frame, RegimeLabel

HEADER = ("frame", *FEATURE_NAMES, "label")


def write_feature_csv(rows: Sequence[tuple[Frame, FeatureVector]], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i, (frame, fv) in enumerate(rows):
            label = "" if frame.label is None else frame.label.value
            w.writerow([i, *(repr(float(v)) for v in fv.as_array()), label])
    return path


def read_feature_csv(path: str | Path) -> tuple[np.ndarray, list[RegimeLabel | None]]:
    """Feature matrix and per-row labels (None where unlabelled)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError(f"empty input: {path} has no header")
        if tuple(h.strip() for h in header) != HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        X, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(HEADER)} columns")
            X.append([float(v) for v in row[1:-1]])
            labels.append(RegimeLabel.parse(row[-1]) if row[-1].strip() else None)
    if not X:
        raise EmptyInputError(f"empty input: {path} has no rows")
    return np.array(X), labels


def load_dataset(path: str | Path) -> Dataset:
    """Labelled rows of a feature CSV as a :class:`Dataset`."""
    X, labels = read_feature_csv(path)
    keep = [i for i, lab in enumerate(labels) if lab is not None]
    if not keep:
        raise ValueError(f"{path}: no labelled rows")
    return Dataset(X[keep], [labels[i].index for i in keep])
