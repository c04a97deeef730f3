"""Bundled synthetic data: two Gaussian blobs separated by a guaranteed margin."""

import csv

import numpy as np

from .data import NUMERIC, RawDataset

__all__ = ["two_blobs", "write_csv"]


def two_blobs(m=200, d=2, separation=4.0, margin=0.5, seed=0, name="two-blobs"):
    """Balanced two-class sample in ``d`` dimensions.

    Class centers sit at ``+-separation/2`` along the diagonal; points that
    fall within ``margin`` of the separating hyperplane are redrawn, so the
    classes are linearly separable with that margin.
    """
    if m < 2 or d < 1:
        raise ValueError("need m >= 2 and d >= 1")
    if not 0.0 <= margin < separation / 2:
        raise ValueError("margin must lie in [0, separation/2)")
    rng = np.random.default_rng(seed)
    direction = np.ones(d) / np.sqrt(d)
    y = np.where(np.arange(m) < (m + 1) // 2, 1.0, -1.0)
    X = np.empty((m, d))
    for i in range(m):
        while True:
            x = rng.normal(size=d) + y[i] * (separation / 2) * direction
            if y[i] * float(x @ direction) >= margin:
                break
        X[i] = x
    order = rng.permutation(m)
    X, y = X[order], y[order]
    return RawDataset(
        name=name,
        attribute_names=tuple(f"x{j + 1}" for j in range(d)),
        attribute_kinds=(NUMERIC,) * d,
        nominal_values={},
        rows=tuple(tuple(repr(float(v)) for v in row) for row in X),
        labels=tuple("positive" if v > 0 else "negative" for v in y),
        class_values=("positive", "negative"),
    )


def write_csv(raw, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(raw.attribute_names) + ["class"])
        for row, label in zip(raw.rows, raw.labels):
            w.writerow(list(row) + [label])
    return path
