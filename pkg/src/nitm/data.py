"""Dataset ingestion and the feature transform used for training.

Nominal attributes are mapped to 1, 2, 3, ... in declaration order, every
column is centered and scaled to unit Euclidean norm over a fitting subset of
rows, and a constant bias column is appended last.  Labels map to +1 for the
first declared class and -1 for the second.
"""

import csv
import io
import os
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataFormatError",
    "RawDataset",
    "NormalizationParams",
    "PreparedDataset",
    "parse_keel",
    "parse_csv",
    "load_dataset",
    "encode_rows",
    "encode_labels",
    "fit_normalization",
    "normalize",
    "encode_and_prepare",
    "apply_preparation",
]

NUMERIC = "numeric"
NOMINAL = "nominal"
MISSING = "?"


class DataFormatError(ValueError):
    """Malformed input data; ``line`` is the 1-based source line when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RawDataset:
    name: str
    attribute_names: tuple
    attribute_kinds: tuple
    nominal_values: dict  # column index -> declared values, in order
    rows: tuple  # tuples of attribute strings
    labels: tuple  # class value string per row
    class_values: tuple  # (positive, negative)

    def __post_init__(self):
        if len(self.class_values) != 2 or self.class_values[0] == self.class_values[1]:
            raise DataFormatError(f"need exactly two class values, got {self.class_values!r}")
        width = len(self.attribute_names)
        if len(self.attribute_kinds) != width:
            raise DataFormatError("attribute_kinds does not match attribute_names")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DataFormatError(f"row {i} has {len(row)} attributes, expected {width}")
        if len(self.labels) != len(self.rows):
            raise DataFormatError("labels and rows differ in length")

    @property
    def m(self):
        return len(self.rows)


@dataclass(frozen=True)
class NormalizationParams:
    attribute_names: tuple
    attribute_kinds: tuple
    nominal_values: dict
    means: np.ndarray
    scales: np.ndarray
    class_values: tuple


@dataclass(frozen=True)
class PreparedDataset:
    features: np.ndarray  # m x (d + 1), bias column last
    labels: np.ndarray  # +1 / -1
    normalization_params: NormalizationParams


# ---------------------------------------------------------------------------
# parsing

def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def _stem(source):
    if isinstance(source, (str, os.PathLike)):
        return os.path.splitext(os.path.basename(source))[0]
    return "dataset"


def _split_values(text):
    return [v.strip() for v in next(csv.reader([text], skipinitialspace=True))]


def _parse_attribute(rest, lineno):
    rest = rest.strip()
    if "{" in rest:
        name, _, body = rest.partition("{")
        if not body.rstrip().endswith("}"):
            raise DataFormatError("unterminated nominal value list", lineno)
        values = [v for v in _split_values(body.rstrip()[:-1]) if v]
        if not values:
            raise DataFormatError("empty nominal value list", lineno)
        return name.strip(), NOMINAL, values
    parts = rest.split()
    if len(parts) < 2:
        raise DataFormatError(f"cannot read attribute declaration {rest!r}", lineno)
    name, kind = parts[0], parts[1].lower()
    if kind not in ("real", "integer", "numeric"):
        raise DataFormatError(f"unsupported attribute type {parts[1]!r}", lineno)
    return name, NUMERIC, None


def parse_keel(source, name=None):
    """Read a KEEL ``.dat`` file (path, text stream or bytes).

    Rows containing ``?`` are dropped with a warning.
    """
    text = _read_text(source)
    relation = None
    attrs = []  # (name, kind, values)
    inputs = outputs = None
    data_line = None
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not line.startswith("@"):
            raise DataFormatError(f"unexpected content before @data: {line[:40]!r}", lineno)
        keyword, _, rest = line.partition(" ")
        keyword = keyword.lower()
        if keyword == "@relation":
            relation = rest.strip() or None
        elif keyword == "@attribute":
            attrs.append(_parse_attribute(rest, lineno))
        elif keyword == "@inputs":
            inputs = [v.strip() for v in rest.split(",") if v.strip()]
        elif keyword in ("@outputs", "@output"):
            outputs = [v.strip() for v in rest.split(",") if v.strip()]
        elif keyword == "@data":
            data_line = lineno
            break
        else:
            raise DataFormatError(f"unknown header keyword {keyword!r}", lineno)
    if data_line is None:
        raise DataFormatError("missing @data section")
    name = name or relation or _stem(source)
    if not attrs:
        raise DataFormatError("no @attribute declarations")
    names = [a[0] for a in attrs]
    index = {n: i for i, n in enumerate(names)}
    out_name = outputs[0] if outputs else names[-1]
    if outputs and len(outputs) != 1:
        raise DataFormatError("exactly one output attribute is supported")
    if out_name not in index:
        raise DataFormatError(f"output attribute {out_name!r} is not declared")
    if inputs is None:
        inputs = [n for n in names if n != out_name]
    for n in inputs:
        if n not in index:
            raise DataFormatError(f"input attribute {n!r} is not declared")
    out_idx = index[out_name]
    if attrs[out_idx][1] != NOMINAL:
        raise DataFormatError(f"class attribute {out_name!r} must be nominal")
    class_values = attrs[out_idx][2]
    if len(class_values) != 2:
        raise DataFormatError(f"expected 2 classes, {out_name!r} declares {len(class_values)}")
    in_idx = [index[n] for n in inputs]

    rows, labels, dropped = [], [], 0
    for lineno in range(data_line + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line or line.startswith("%"):
            continue
        values = _split_values(line)
        if len(values) != len(attrs):
            raise DataFormatError(f"expected {len(attrs)} values, found {len(values)}", lineno)
        if any(v == MISSING for v in values):
            dropped += 1
            continue
        for i, v in enumerate(values):
            _, kind, allowed = attrs[i]
            if kind == NOMINAL and v not in allowed:
                raise DataFormatError(f"value {v!r} not declared for attribute {attrs[i][0]!r}", lineno)
            if kind == NUMERIC:
                try:
                    float(v)
                except ValueError:
                    raise DataFormatError(f"non-numeric value {v!r} for attribute {attrs[i][0]!r}", lineno) from None
        rows.append(tuple(values[i] for i in in_idx))
        labels.append(values[out_idx])
    if dropped:
        warnings.warn(f"{name}: dropped {dropped} rows with missing values", stacklevel=2)
    return RawDataset(
        name=name,
        attribute_names=tuple(inputs),
        attribute_kinds=tuple(attrs[i][1] for i in in_idx),
        nominal_values={j: tuple(attrs[i][2]) for j, i in enumerate(in_idx) if attrs[i][1] == NOMINAL},
        rows=tuple(rows),
        labels=tuple(labels),
        class_values=(class_values[0], class_values[1]),
    )


def _is_number(v):
    try:
        float(v)
    except ValueError:
        return False
    return True


def parse_csv(source, label_column=-1, positive_label=None, name=None):
    """Read a headed CSV file.

    ``label_column`` is a header name or a column position.  Columns whose
    values all parse as numbers are numeric, the rest nominal (values ordered
    by first appearance).  ``positive_label`` picks the +1 class; default is
    the first label seen.
    """
    text = _read_text(source)
    name = name or _stem(source)
    records = [r for r in csv.reader(io.StringIO(text), skipinitialspace=True) if any(f.strip() for f in r)]
    if not records:
        raise DataFormatError("empty CSV input")
    header = [h.strip() for h in records[0]]
    if all(_is_number(h) for h in header):
        raise DataFormatError("CSV header row is missing (first row is all numeric)", 1)
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DataFormatError(f"label column {label_column!r} not in header")
        lab = header.index(label_column)
    else:
        lab = int(label_column) % len(header)
    body = []
    dropped = 0
    for lineno, rec in enumerate(records[1:], start=2):
        rec = [f.strip() for f in rec]
        if len(rec) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, found {len(rec)}", lineno)
        if any(f in (MISSING, "") for f in rec):
            dropped += 1
            continue
        body.append(rec)
    if dropped:
        warnings.warn(f"{name}: dropped {dropped} rows with missing values", stacklevel=2)
    feat_idx = [j for j in range(len(header)) if j != lab]
    labels = [r[lab] for r in body]
    seen = list(dict.fromkeys(labels))
    if positive_label is not None:
        positive_label = str(positive_label)
        others = [v for v in seen if v != positive_label]
        if len(others) > 1:
            raise DataFormatError(f"label column has more than two values: {seen}")
        if positive_label not in seen and len(others) == 2:
            raise DataFormatError(f"positive label {positive_label!r} not present")
        classes = (positive_label, others[0] if others else f"not {positive_label}")
    else:
        if len(seen) != 2:
            raise DataFormatError(f"label column must have exactly two values, found {seen}")
        classes = (seen[0], seen[1])
    kinds, nominal = [], {}
    for j, col in enumerate(feat_idx):
        values = [r[col] for r in body]
        if all(_is_number(v) for v in values):
            kinds.append(NUMERIC)
        else:
            kinds.append(NOMINAL)
            nominal[j] = tuple(dict.fromkeys(values))
    return RawDataset(
        name=name,
        attribute_names=tuple(header[j] for j in feat_idx),
        attribute_kinds=tuple(kinds),
        nominal_values=nominal,
        rows=tuple(tuple(r[j] for j in feat_idx) for r in body),
        labels=tuple(labels),
        class_values=classes,
    )


def load_dataset(path, fmt=None, label_column=-1, positive_label=None):
    """Dispatch on ``fmt`` (``"keel"`` or ``"csv"``), defaulting by file extension."""
    if fmt is None:
        fmt = "keel" if str(path).lower().endswith(".dat") else "csv"
    if fmt == "keel":
        return parse_keel(path)
    if fmt == "csv":
        return parse_csv(path, label_column=label_column, positive_label=positive_label)
    raise ValueError(f"unknown data format {fmt!r}")


# ---------------------------------------------------------------------------
# feature transform

def encode_rows(kinds, nominal_values, rows, names=None):
    """Numeric matrix of raw attribute values; nominal codes start at 1."""
    lookup = {j: {v: k + 1 for k, v in enumerate(vals)} for j, vals in nominal_values.items()}
    out = np.empty((len(rows), len(kinds)), dtype=float)
    for i, row in enumerate(rows):
        if len(row) != len(kinds):
            raise DataFormatError(f"row {i} has {len(row)} attributes, expected {len(kinds)}")
        for j, v in enumerate(row):
            if kinds[j] == NOMINAL:
                try:
                    out[i, j] = lookup[j][v]
                except KeyError:
                    col = names[j] if names else j
                    raise DataFormatError(f"unseen nominal value {v!r} in column {col!r}") from None
            else:
                out[i, j] = float(v)
    return out


def encode_labels(class_values, labels):
    pos, neg = class_values
    out = np.empty(len(labels), dtype=float)
    for i, v in enumerate(labels):
        if v == pos:
            out[i] = 1.0
        elif v == neg:
            out[i] = -1.0
        else:
            raise DataFormatError(f"unknown class value {v!r}")
    return out


def fit_normalization(encoded, fit_indices):
    """Column means and unit-norm scales over ``fit_indices``.

    A column that is constant on the fitting rows keeps scale 1.
    """
    fit_indices = np.asarray(fit_indices)
    if fit_indices.size == 0:
        raise ValueError("fit set is empty")
    sub = encoded[fit_indices]
    means = sub.mean(axis=0)
    norms = np.linalg.norm(sub - means, axis=0)
    scales = np.where(norms > 0.0, norms, 1.0)
    return means, scales


def normalize(encoded, means, scales):
    """Center, scale and append the bias column."""
    out = np.empty((encoded.shape[0], encoded.shape[1] + 1))
    out[:, :-1] = (encoded - means) / scales
    out[:, -1] = 1.0
    return out


def encode_and_prepare(raw, fit_indices=None):
    """Encode ``raw`` and normalize every row with statistics from ``fit_indices``."""
    if fit_indices is None:
        fit_indices = np.arange(raw.m)
    encoded = encode_rows(raw.attribute_kinds, raw.nominal_values, raw.rows, raw.attribute_names)
    means, scales = fit_normalization(encoded, fit_indices)
    params = NormalizationParams(
        attribute_names=raw.attribute_names,
        attribute_kinds=raw.attribute_kinds,
        nominal_values=dict(raw.nominal_values),
        means=means,
        scales=scales,
        class_values=raw.class_values,
    )
    return PreparedDataset(
        features=normalize(encoded, means, scales),
        labels=encode_labels(raw.class_values, raw.labels),
        normalization_params=params,
    )


def apply_preparation(params, rows):
    """Apply stored statistics to attribute rows (never refits)."""
    encoded = encode_rows(params.attribute_kinds, params.nominal_values, rows, params.attribute_names)
    return normalize(encoded, params.means, params.scales)
