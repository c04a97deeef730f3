"""Model-selection protocol: DOB-SCV partitioning, inner C selection, grid runs.

A dataset is split into ``k = 10`` parts by DOB-SCV; three parts are held out
for testing and the remaining seven serve C selection by 7-fold cross
validation.  Every (nu, q') pair is a separate model; its selected C is
retrained on all seven parts and scored on the held-out parts.
"""

import csv
import itertools
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import encode_labels, encode_rows, fit_normalization, normalize
from .solver import SolverConfig
from .train import error_rate, fit_primal, make_spec

__all__ = [
    "FoldAssignment",
    "GridSpec",
    "CellResult",
    "ExperimentResult",
    "ExperimentData",
    "RowStore",
    "dobscv_split",
    "select_C",
    "run_cell",
    "run_grid",
    "emit_results",
    "RESULT_COLUMNS",
]

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("dataset", "nu", "q_prime", "selected_C", "cv_error", "test_error", "iterations", "seconds")


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int

    def parts(self):
        return [np.flatnonzero(self.fold_of == f) for f in range(self.k)]


@dataclass(frozen=True)
class GridSpec:
    nu_values: tuple = (1.0, 10.0, 1e2, 1e3, 1e4, math.inf)
    q_prime_values: tuple = tuple(round(0.1 * i, 1) for i in range(11))
    C_values: tuple = (1.0, 1e2, 1e4, 1e6, 1e8, 1e10)
    seed: int = 0

    def __post_init__(self):
        for name in ("nu_values", "q_prime_values", "C_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, vals)
        if any(not v > 0 for v in self.nu_values):
            raise ValueError("nu values must be positive")
        if any(not 0.0 <= v <= 1.0 for v in self.q_prime_values):
            raise ValueError("q' values must lie in [0, 1]")
        if any(not (v > 0 and math.isfinite(v)) for v in self.C_values):
            raise ValueError("C values must be positive and finite")

    def models(self):
        return list(itertools.product(self.nu_values, self.q_prime_values))


@dataclass
class CellResult:
    nu: float
    q_prime: float
    selected_C: float
    cv_error: float
    test_error: float
    iterations: int
    termination_reason: str
    seconds: float
    cv_errors: dict = field(default_factory=dict)  # C -> mean validation error
    failed: bool = False


@dataclass
class ExperimentResult:
    dataset: str
    seed: int
    k: int
    test_parts: tuple
    grid: GridSpec
    cells: list
    fold_of: np.ndarray
    seconds: float = 0.0

    def cell(self, nu, q_prime):
        for c in self.cells:
            if c.nu == nu and c.q_prime == q_prime:
                return c
        raise KeyError((nu, q_prime))

    def best_cell(self):
        return min(self.cells, key=lambda c: (c.test_error, c.cv_error))

    def deterministic_view(self):
        """Everything except wall-clock timings, for reproducibility checks."""
        cells = []
        for c in self.cells:
            d = asdict(c)
            d.pop("seconds")
            cells.append(d)
        return {"dataset": self.dataset, "seed": self.seed, "k": self.k,
                "test_parts": list(self.test_parts), "fold_of": self.fold_of.tolist(), "cells": cells}


@dataclass(frozen=True, eq=False)
class ExperimentData:
    """Encoded (not yet normalized) attributes with +1/-1 labels."""

    name: str
    encoded: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_raw(cls, raw):
        enc = encode_rows(raw.attribute_kinds, raw.nominal_values, raw.rows, raw.attribute_names)
        return cls(raw.name, enc, encode_labels(raw.class_values, raw.labels))


class RowStore:
    """All row access during a run goes through :meth:`take`."""

    def __init__(self, data):
        self._encoded = data.encoded
        self._labels = data.labels

    def take(self, indices):
        indices = np.asarray(indices, dtype=int)
        return self._encoded[indices], self._labels[indices]


# ---------------------------------------------------------------------------
# DOB-SCV

def dobscv_split(features, labels, k=10, seed=0):
    """Distribution-optimally-balanced stratified fold assignment.

    Per class: draw a random unassigned instance, collect its ``k - 1``
    nearest unassigned same-class neighbours (Euclidean on column-normalized
    features, smaller index wins ties) and deal the group over the ``k`` folds
    in a random order.  Leftovers (fewer than ``k``) go to distinct folds,
    least-filled first.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    m = X.shape[0]
    if k < 2:
        raise ValueError("k must be at least 2")
    if y.shape != (m,):
        raise ValueError("labels must match the number of rows")
    if m == 0:
        raise ValueError("empty dataset")
    means, scales = fit_normalization(X, np.arange(m))
    Z = (X - means) / scales
    rng = np.random.default_rng(seed)
    fold_of = np.full(m, -1, dtype=int)
    counts = np.zeros(k, dtype=int)
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            warnings.warn(f"class {cls} has {members.size} < k={k} instances; some folds lack it",
                          stacklevel=2)
        sub = Z[members]
        dist = np.sqrt(np.maximum(((sub[:, None, :] - sub[None, :, :]) ** 2).sum(-1), 0.0))
        alive = np.ones(members.size, dtype=bool)
        while alive.sum() >= k:
            pool = np.flatnonzero(alive)
            seed_pos = pool[rng.integers(pool.size)]
            others = pool[pool != seed_pos]
            # lexsort: primary key distance, secondary original index
            order = others[np.lexsort((members[others], dist[seed_pos, others]))]
            group = np.concatenate(([seed_pos], order[: k - 1]))
            for pos, f in zip(group, rng.permutation(k)):
                fold_of[members[pos]] = f
                counts[f] += 1
            alive[group] = False
        rest = np.flatnonzero(alive)
        if rest.size:
            tiebreak = rng.permutation(k)
            folds = sorted(range(k), key=lambda f: (counts[f], tiebreak[f]))[: rest.size]
            for pos, f in zip(rest, folds):
                fold_of[members[pos]] = f
                counts[f] += 1
    return FoldAssignment(fold_of=fold_of, k=k, seed=seed)


# ---------------------------------------------------------------------------
# training / selection

def _fit_and_score(store, train_idx, eval_idx, nu, q_prime, C, config):
    Xtr, ytr = store.take(train_idx)
    Xev, yev = store.take(eval_idx)
    means, scales = fit_normalization(Xtr, np.arange(len(ytr)))
    result = fit_primal(make_spec(normalize(Xtr, means, scales), ytr, nu, q_prime, C), config)
    return error_rate(result.point, normalize(Xev, means, scales), yev), result


def select_C(store, parts, nu, q_prime, C_values, config=None):
    """Pick C by rotating cross validation over ``parts`` (lists of row indices).

    Returns ``(C, mean_validation_error, {C: error})``.  Ties go to the
    smaller C; a failed solve counts as error 1.0 for its fold.
    """
    parts = [np.asarray(p, dtype=int) for p in parts]
    if len(parts) < 2:
        raise ValueError("need at least two parts for cross validation")
    errors = {}
    for C in C_values:
        fold_errors = []
        for j, val in enumerate(parts):
            train = np.concatenate([p for i, p in enumerate(parts) if i != j])
            try:
                err, _ = _fit_and_score(store, train, val, nu, q_prime, C, config)
            except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
                log.warning("solve failed (nu=%g, q'=%g, C=%g, fold %d): %s", nu, q_prime, C, j, exc)
                err = 1.0
            fold_errors.append(err)
        errors[float(C)] = float(np.mean(fold_errors))
    best = min(errors, key=lambda c: (round(errors[c], 12), c))
    return best, errors[best], errors


def run_cell(store, dev_parts, test_idx, nu, q_prime, C_values, config=None):
    """Select C on the development parts, retrain on all of them, score on the test rows."""
    start = time.perf_counter()
    C, cv_error, cv_errors = select_C(store, dev_parts, nu, q_prime, C_values, config)
    dev = np.concatenate([np.asarray(p, dtype=int) for p in dev_parts])
    try:
        test_error, result = _fit_and_score(store, dev, test_idx, nu, q_prime, C, config)
        iterations, reason, failed = result.iterations, result.termination_reason.value, False
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.warning("final solve failed (nu=%g, q'=%g, C=%g): %s", nu, q_prime, C, exc)
        test_error, iterations, reason, failed = 1.0, 0, "error", True
    return CellResult(nu=nu, q_prime=q_prime, selected_C=C, cv_error=cv_error, test_error=test_error,
                      iterations=iterations, termination_reason=reason,
                      seconds=time.perf_counter() - start, cv_errors=cv_errors, failed=failed)


def _cell_worker(args):
    data, dev_parts, test_idx, nu, q_prime, C_values, config = args
    return run_cell(RowStore(data), dev_parts, test_idx, nu, q_prime, C_values, config)


def run_grid(data, grid=None, k=10, test_parts=None, workers=1, config=None, on_cell=None, store=None):
    """Run every (nu, q') model of ``grid`` on ``data``.

    ``test_parts`` defaults to the three highest fold ids.  ``on_cell`` is
    called with each finished :class:`CellResult` (in completion order) so
    callers can persist incrementally; the returned cells follow grid order
    regardless of ``workers``.
    """
    grid = grid or GridSpec()
    config = config or SolverConfig()
    started = time.perf_counter()
    folds = dobscv_split(data.encoded, data.labels, k=k, seed=grid.seed)
    if test_parts is None:
        test_parts = tuple(range(k - 3, k))
    test_parts = tuple(int(p) for p in test_parts)
    if not test_parts or any(not 0 <= p < k for p in test_parts) or len(set(test_parts)) == k:
        raise ValueError(f"invalid test parts {test_parts!r} for k={k}")
    parts = folds.parts()
    dev_parts = [parts[i] for i in range(k) if i not in test_parts]
    test_idx = np.concatenate([parts[i] for i in test_parts])
    models = grid.models()
    cells = [None] * len(models)
    if workers > 1 and store is None:
        jobs = [(data, dev_parts, test_idx, nu, qp, grid.C_values, config) for nu, qp in models]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, cell in enumerate(pool.map(_cell_worker, jobs)):
                cells[i] = cell
                if on_cell:
                    on_cell(cell)
    else:
        store = store or RowStore(data)
        for i, (nu, qp) in enumerate(models):
            cells[i] = run_cell(store, dev_parts, test_idx, nu, qp, grid.C_values, config)
            if on_cell:
                on_cell(cells[i])
    return ExperimentResult(dataset=data.name, seed=grid.seed, k=k, test_parts=test_parts, grid=grid,
                            cells=cells, fold_of=folds.fold_of, seconds=time.perf_counter() - started)


# ---------------------------------------------------------------------------
# output

def format_number(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def cell_row(dataset, cell):
    return {
        "dataset": dataset,
        "nu": format_number(cell.nu),
        "q_prime": format_number(cell.q_prime),
        "selected_C": format_number(cell.selected_C),
        "cv_error": format_number(cell.cv_error),
        "test_error": format_number(cell.test_error),
        "iterations": str(cell.iterations),
        "seconds": f"{cell.seconds:.4f}",
    }


def _summary(result):
    best = result.best_cell()
    return {
        "dataset": result.dataset,
        "seed": result.seed,
        "k": result.k,
        "test_parts": list(result.test_parts),
        "grid": {
            "nu_values": [format_number(v) for v in result.grid.nu_values],
            "q_prime_values": list(result.grid.q_prime_values),
            "C_values": list(result.grid.C_values),
        },
        "cells": len(result.cells),
        "failed_cells": sum(c.failed for c in result.cells),
        "best": {"nu": format_number(best.nu), "q_prime": best.q_prime, "selected_C": best.selected_C,
                 "cv_error": best.cv_error, "test_error": best.test_error},
        "seconds": round(result.seconds, 3),
    }


def emit_results(results, out_dir):
    """Write ``results.csv``, ``summary.json`` and one ``<dataset>.svg`` per result.

    Returns the list of written paths.
    """
    from .plotting import plot_test_error_curves

    if isinstance(results, ExperimentResult):
        results = [results]
    results = list(results)
    if not results or any(not r.cells for r in results):
        raise ValueError("nothing to emit: experiment result has no cells")
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir!r} is not writable")
    written = []
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for r in results:
            for cell in r.cells:
                writer.writerow(cell_row(r.dataset, cell))
    written.append(csv_path)
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump({"datasets": [_summary(r) for r in results]}, fh, indent=2)
        fh.write("\n")
    written.append(summary_path)
    for r in results:
        svg_path = os.path.join(out_dir, f"{r.dataset}.svg")
        plot_test_error_curves(r, svg_path)
        written.append(svg_path)
    return written
