"""Command-line interface: ``nitm {train,predict,eval,experiment,selfcheck}``.

Exit codes: 0 success, 1 usage or invalid parameters, 2 unreadable or
malformed data, 3 solver (or self-check) failure.

Settings come from built-in defaults, then an optional ``--config`` INI file
(section ``[run]``, keys spelled like the long flags with underscores), then
the command line.
"""

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .data import DataFormatError, apply_preparation, encode_and_prepare, encode_labels, load_dataset, parse_keel
from .experiment import ExperimentData, GridSpec, cell_row, emit_results, run_grid
from .loss import check_q_prime
from .persist import ModelFileError, TrainedModel, dumps, read_model, write_model
from .plotting import nu_label
from .selfcheck import run_selfcheck
from .solver import SolverConfig
from .synthetic import two_blobs
from .train import error_rate, fit_primal, make_spec

__all__ = ["main", "RunConfig", "UsageError", "parse_nu", "load_grid_file"]

log = logging.getLogger("nitm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
SYNTHETIC = "synthetic"


class UsageError(Exception):
    pass


class SolverFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str = ""
    data: list = field(default_factory=list)
    format: str | None = None
    model: str | None = None
    nu: list = field(default_factory=lambda: [math.inf])
    q_prime: list = field(default_factory=lambda: [0.0])
    C: list = field(default_factory=lambda: [1.0])
    seed: int = 0
    out: str | None = None
    workers: int = 1
    grid_file: str | None = None
    test_parts: tuple | None = None
    k: int = 10
    max_iterations: int = 5000
    label_column: str = "-1"
    positive_label: str | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# value parsing

def parse_nu(text):
    """Degrees of freedom; ``inf`` selects the Gaussian prior."""
    text = str(text).strip()
    value = math.inf if text.lower() in ("inf", "+inf", "infinity") else float(text)
    if not value > 0:
        raise ValueError(f"nu must be positive, got {text!r}")
    return value


def _parse_C(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"C must be positive and finite, got {text!r}")
    return value


def _parse_list(text, convert):
    if isinstance(text, (list, tuple)):
        return [convert(v) for v in text]
    items = [t for t in str(text).replace(",", " ").split() if t]
    if not items:
        raise ValueError("empty value list")
    return [convert(t) for t in items]


_CONVERTERS = {
    "nu": lambda v: _parse_list(v, parse_nu),
    "q_prime": lambda v: _parse_list(v, check_q_prime),
    "C": lambda v: _parse_list(v, _parse_C),
    "data": lambda v: _parse_list(v, str),
    "seed": int,
    "workers": int,
    "k": int,
    "max_iterations": int,
    "test_parts": lambda v: tuple(_parse_list(v, int)),
}


def _convert(key, value):
    try:
        return _CONVERTERS.get(key, str)(value)
    except ValueError as exc:
        raise UsageError(f"invalid value for {key}: {exc}") from None


def load_config_file(path):
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from None
    if not parser.has_section("run"):
        raise UsageError(f"config file {path!r} has no [run] section")
    known = {f.name for f in fields(RunConfig)} - {"command"}
    values = {}
    for key, raw in parser.items("run"):
        key = key.replace("-", "_")
        if key not in known:
            raise UsageError(f"unknown key {key!r} in config file {path!r}")
        values[key] = _convert(key, raw)
    return values


def load_grid_file(path):
    """Grid overrides from an INI file with a ``[grid]`` section."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read grid file {path!r}: {exc}") from None
    if not parser.has_section("grid"):
        raise UsageError(f"grid file {path!r} has no [grid] section")
    section = parser["grid"]
    unknown = set(section) - {"nu_values", "q_prime_values", "c_values", "seed"}
    if unknown:
        raise UsageError(f"unknown keys in grid file: {', '.join(sorted(unknown))}")
    kwargs = {"seed": int(section.get("seed", 0))}
    if "nu_values" in section:
        kwargs["nu_values"] = _convert("nu", section["nu_values"])
    if "q_prime_values" in section:
        kwargs["q_prime_values"] = _convert("q_prime", section["q_prime_values"])
    if "c_values" in section:
        kwargs["C_values"] = _convert("C", section["c_values"])
    return GridSpec(**kwargs)


# ---------------------------------------------------------------------------
# argument parsing

def build_parser():
    parser = _Parser(prog="nitm", description="Nonextensive information theoretical machine.")
    parser.add_argument("--version", action="version", version=f"nitm {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", help="INI file with a [run] section")
        p.add_argument("--verbose", "-v", action="store_true")
        if data:
            p.add_argument("--data", action="append",
                           help=f"dataset path (.dat = KEEL, otherwise CSV) or '{SYNTHETIC}'")
            p.add_argument("--format", choices=("keel", "csv"))
            p.add_argument("--label-column", help="CSV label column name or position (default last)")
            p.add_argument("--positive-label", help="CSV class value mapped to +1")

    def model_params(p, many):
        suffix = " (comma-separated list allowed)" if many else ""
        p.add_argument("--nu", help="prior degrees of freedom, or 'inf'" + suffix)
        p.add_argument("--q-prime", dest="q_prime", help="loss index in [0, 1]" + suffix)
        p.add_argument("--C", dest="C", help="loss weight" + suffix)
        p.add_argument("--max-iterations", dest="max_iterations")

    p = sub.add_parser("train", help="fit a model and write a model file")
    common(p)
    model_params(p, many=False)
    p.add_argument("--seed")
    p.add_argument("--out", help="model file (default: standard output)")

    p = sub.add_parser("predict", help="print one predicted label per input row")
    common(p)
    p.add_argument("--model")
    p.add_argument("--out", help="prediction file (default: standard output)")

    p = sub.add_parser("eval", help="report the error rate of a model on labelled data")
    common(p)
    p.add_argument("--model")

    p = sub.add_parser("experiment", help="run the DOB-SCV / grid-search protocol")
    common(p)
    model_params(p, many=True)
    p.add_argument("--seed")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--workers")
    p.add_argument("--grid-file", dest="grid_file", help="INI file with a [grid] section")
    p.add_argument("--test-parts", dest="test_parts", help="held-out fold ids (default: the last three)")
    p.add_argument("--k", help="number of DOB-SCV parts (default 10)")

    p = sub.add_parser("selfcheck", help="run the fast invariant suite")
    common(p, data=False)
    p.add_argument("--seed")
    return parser


def resolve_config(argv):
    args = build_parser().parse_args(argv)
    if not args.command:
        raise UsageError("a command is required (train, predict, eval, experiment, selfcheck)")
    values = {}
    if args.config:
        values.update(load_config_file(args.config))
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _convert(f.name, flag)
    cfg = replace(RunConfig(command=args.command), **values)
    return cfg, args, set(values)


# ---------------------------------------------------------------------------
# data helpers

def _label_column(cfg):
    try:
        return int(cfg.label_column)
    except ValueError:
        return cfg.label_column


def _load_raw(path, cfg):
    if path == SYNTHETIC:
        return two_blobs(seed=cfg.seed)
    return load_dataset(path, cfg.format, label_column=_label_column(cfg), positive_label=cfg.positive_label)


def _single_data(cfg):
    if not cfg.data:
        raise UsageError("--data is required")
    if len(cfg.data) > 1:
        raise UsageError(f"{cfg.command} takes a single --data")
    return cfg.data[0]


def _feature_rows(path, cfg, params):
    """Attribute rows of ``path`` in the model's column order; labels are ignored if present."""
    if path == SYNTHETIC:
        raw = two_blobs(seed=cfg.seed)
        header, rows = list(raw.attribute_names), [list(r) for r in raw.rows]
    elif (cfg.format or ("keel" if path.lower().endswith(".dat") else "csv")) == "keel":
        raw = parse_keel(path)
        header, rows = list(raw.attribute_names), [list(r) for r in raw.rows]
        if len(header) != len(params.attribute_names):
            raise DataFormatError(f"feature arity mismatch: data has {len(header)} attributes, "
                                  f"model expects {len(params.attribute_names)}")
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            table = [r for r in csv.reader(fh) if r]
        if not table:
            raise DataFormatError("empty CSV file")
        header, rows = [h.strip() for h in table[0]], table[1:]
        for i, r in enumerate(rows, 2):
            if len(r) != len(header):
                raise DataFormatError(f"row has {len(r)} fields, header has {len(header)}", line=i)
    index = {name: j for j, name in enumerate(header)}
    missing = [n for n in params.attribute_names if n not in index]
    if missing:
        raise DataFormatError(f"feature arity mismatch: model expects {len(params.attribute_names)} "
                              f"features, missing column(s) {', '.join(missing)}")
    cols = [index[n] for n in params.attribute_names]
    selected = [tuple(r[j].strip() for j in cols) for r in rows]
    try:
        return apply_preparation(params, selected)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from None


def _read_model(cfg):
    if not cfg.model:
        raise UsageError("--model is required")
    try:
        return read_model(cfg.model)
    except OSError as exc:
        raise DataFormatError(f"cannot read model file: {exc}") from None
    except ModelFileError as exc:
        raise DataFormatError(f"malformed model file {cfg.model!r}: {exc}") from None


def _scalar(values, name):
    if len(values) != 1:
        raise UsageError(f"{name} takes a single value here")
    return values[0]


# ---------------------------------------------------------------------------
# commands

def cmd_train(cfg, stdout):
    nu, q_prime, C = _scalar(cfg.nu, "--nu"), _scalar(cfg.q_prime, "--q-prime"), _scalar(cfg.C, "--C")
    solver_cfg = _solver_config(cfg)
    raw = _load_raw(_single_data(cfg), cfg)
    prepared = encode_and_prepare(raw)
    try:
        spec = make_spec(prepared.features, prepared.labels, nu, q_prime, C)
        result = fit_primal(spec, solver_cfg)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        raise SolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(result.point)):
        raise SolverFailure("solver returned a non-finite weight vector")
    train_error = error_rate(result.point, prepared.features, prepared.labels)
    model = TrainedModel(
        mu=result.point, params=prepared.normalization_params, nu=nu, q_prime=q_prime, C=C, seed=cfg.seed,
        solver={"iterations": result.iterations, "evaluations": result.evaluations,
                "termination_reason": result.termination_reason.value, "objective": result.value,
                "gradient_norm": result.gradient_norm, "training_error": train_error})
    if cfg.out:
        write_model(model, cfg.out)
    else:
        stdout.write(dumps(model))
    log.info("trained on %d rows: training error %.4f, %s after %d iterations", raw.m, train_error,
             result.termination_reason.value, result.iterations)
    return EXIT_OK


def cmd_predict(cfg, stdout):
    model = _read_model(cfg)
    features = _feature_rows(_single_data(cfg), cfg, model.params)
    scores = features @ model.mu
    pos, neg = model.params.class_values
    lines = "".join(f"{pos if s >= 0 else neg}\n" for s in scores)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        stdout.write(lines)
    return EXIT_OK


def cmd_eval(cfg, stdout):
    model = _read_model(cfg)
    path = _single_data(cfg)
    features = _feature_rows(path, cfg, model.params)
    raw = _load_raw(path, cfg)
    labels = encode_labels(model.params.class_values, raw.labels)
    if labels.shape[0] != features.shape[0]:
        raise DataFormatError("label count does not match feature rows")
    err = error_rate(model.mu, features, labels)
    stdout.write(f"rows\t{labels.size}\nerrors\t{int(round(err * labels.size))}\nerror_rate\t{err:.6f}\n")
    return EXIT_OK


def _solver_config(cfg):
    try:
        return SolverConfig(max_iterations=cfg.max_iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _grid(cfg, explicit):
    # precedence: defaults < grid file < explicit settings (config file or flags)
    base = load_grid_file(cfg.grid_file) if cfg.grid_file else GridSpec()
    overrides = {}
    if "seed" in explicit:
        overrides["seed"] = cfg.seed
    if "nu" in explicit:
        overrides["nu_values"] = cfg.nu
    if "q_prime" in explicit:
        overrides["q_prime_values"] = cfg.q_prime
    if "C" in explicit:
        overrides["C_values"] = cfg.C
    return replace(base, **overrides)


def cmd_experiment(cfg, stdout, explicit):
    if not cfg.data:
        raise UsageError("--data is required")
    if cfg.workers < 1 or cfg.k < 2:
        raise UsageError("--workers must be >= 1 and --k >= 2")
    grid = _grid(cfg, explicit)
    solver_cfg = _solver_config(cfg)
    out_dir = cfg.out or "results"
    datasets = [ExperimentData.from_raw(_load_raw(path, cfg)) for path in cfg.data]
    os.makedirs(out_dir, exist_ok=True)
    results = []
    for data in datasets:
        partial = os.path.join(out_dir, f"{data.name}.cells.jsonl")
        with open(partial, "w", encoding="utf-8") as fh:
            def persist(cell, fh=fh, name=data.name):
                fh.write(json.dumps(cell_row(name, cell)) + "\n")
                fh.flush()

            try:
                result = run_grid(data, grid, k=cfg.k, test_parts=cfg.test_parts, workers=cfg.workers,
                                  config=solver_cfg, on_cell=persist)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        results.append(result)
        _print_table(result, stdout)
    for path in emit_results(results, out_dir):
        stdout.write(f"wrote {path}\n")
    if all(c.failed for r in results for c in r.cells):
        raise SolverFailure("every grid cell failed")
    return EXIT_OK


def _print_table(result, stdout):
    stdout.write(f"# {result.dataset}: {len(result.cells)} cells, test parts {list(result.test_parts)}, "
                 f"{result.seconds:.1f}s\n")
    stdout.write("nu\tq_prime\tselected_C\tcv_error\ttest_error\titerations\n")
    for c in result.cells:
        stdout.write(f"{nu_label(c.nu)}\t{c.q_prime:g}\t{c.selected_C:g}\t{c.cv_error:.4f}\t"
                     f"{c.test_error:.4f}\t{c.iterations}\n")
    best = result.best_cell()
    stdout.write(f"# best: nu={nu_label(best.nu)} q'={best.q_prime:g} C={best.selected_C:g} "
                 f"test_error={best.test_error:.4f}\n")


def cmd_selfcheck(cfg, stdout):
    outcomes = run_selfcheck(seed=cfg.seed, out=stdout)
    failed = [o.name for o in outcomes if not o.passed]
    stdout.write(f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed\n")
    return EXIT_SOLVER if failed else EXIT_OK


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg, args, explicit = resolve_config(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=stderr)
        if cfg.command == "train":
            return cmd_train(cfg, stdout)
        if cfg.command == "predict":
            return cmd_predict(cfg, stdout)
        if cfg.command == "eval":
            return cmd_eval(cfg, stdout)
        if cfg.command == "experiment":
            return cmd_experiment(cfg, stdout, explicit)
        return cmd_selfcheck(cfg, stdout)
    except UsageError as exc:
        stderr.write(f"nitm: usage error: {exc}\n")
        return EXIT_USAGE
    except (DataFormatError, OSError) as exc:
        stderr.write(f"nitm: data error: {exc}\n")
        return EXIT_DATA
    except SolverFailure as exc:
        stderr.write(f"nitm: solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
