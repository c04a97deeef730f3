"""Versioned key/value model files.

One ``key = <json value>`` per line, keys in a fixed order, so files are
diffable and byte-identical for identical inputs.  ``nu`` is stored as a
string so that ``"inf"`` survives JSON.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import NormalizationParams

__all__ = ["FORMAT_VERSION", "ModelFileError", "TrainedModel", "write_model", "read_model", "dumps", "loads"]

FORMAT_VERSION = 1
HEADER = "# nitm model file"
_KEYS = ("format_version", "nu", "q_prime", "C", "seed", "mu", "attribute_names", "attribute_kinds",
         "nominal_values", "means", "scales", "class_values", "solver")


class ModelFileError(ValueError):
    pass


@dataclass
class TrainedModel:
    mu: np.ndarray
    params: NormalizationParams
    nu: float
    q_prime: float
    C: float
    seed: int = 0
    solver: dict = field(default_factory=dict)


def _nu_token(nu):
    return "inf" if math.isinf(nu) else repr(float(nu))


def dumps(model):
    p = model.params
    values = {
        "format_version": FORMAT_VERSION,
        "nu": _nu_token(model.nu),
        "q_prime": float(model.q_prime),
        "C": float(model.C),
        "seed": int(model.seed),
        "mu": [float(v) for v in model.mu],
        "attribute_names": list(p.attribute_names),
        "attribute_kinds": list(p.attribute_kinds),
        "nominal_values": {str(k): list(v) for k, v in sorted(p.nominal_values.items())},
        "means": [float(v) for v in p.means],
        "scales": [float(v) for v in p.scales],
        "class_values": list(p.class_values),
        "solver": model.solver,
    }
    lines = [HEADER] + [f"{k} = {json.dumps(values[k], sort_keys=True)}" for k in _KEYS]
    return "\n".join(lines) + "\n"


def _float_list(values, key, length=None):
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise ModelFileError(f"{key!r} must be a list of numbers")
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelFileError(f"{key!r} contains non-finite values")
    if length is not None and arr.size != length:
        raise ModelFileError(f"{key!r} has length {arr.size}, expected {length}")
    return arr


def loads(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ModelFileError(f"line {lineno}: expected 'key = value'")
        if key not in _KEYS:
            raise ModelFileError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ModelFileError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"line {lineno}: value of {key!r} is not valid JSON ({exc.msg})") from None
    missing = [k for k in _KEYS if k not in values]
    if missing:
        raise ModelFileError(f"missing keys: {', '.join(missing)}")
    if values["format_version"] != FORMAT_VERSION:
        raise ModelFileError(f"unsupported format_version {values['format_version']!r}")
    try:
        nu = float(values["nu"])
        q_prime, C = float(values["q_prime"]), float(values["C"])
    except (TypeError, ValueError):
        raise ModelFileError("'nu', 'q_prime' and 'C' must be numbers") from None
    if not nu > 0 or not 0.0 <= q_prime <= 1.0 or not (C > 0 and math.isfinite(C)):
        raise ModelFileError("parameters out of range (nu > 0, 0 <= q_prime <= 1, C > 0)")
    names = values["attribute_names"]
    kinds = values["attribute_kinds"]
    if not isinstance(names, list) or not isinstance(kinds, list) or len(names) != len(kinds):
        raise ModelFileError("'attribute_names' and 'attribute_kinds' must be lists of equal length")
    d = len(names)
    classes = values["class_values"]
    if not isinstance(classes, list) or len(classes) != 2:
        raise ModelFileError("'class_values' must list exactly two classes")
    try:
        nominal = {int(k): tuple(v) for k, v in values["nominal_values"].items()}
    except (AttributeError, TypeError, ValueError):
        raise ModelFileError("'nominal_values' must map column indices to value lists") from None
    params = NormalizationParams(
        attribute_names=tuple(names),
        attribute_kinds=tuple(kinds),
        nominal_values=nominal,
        means=_float_list(values["means"], "means", d),
        scales=_float_list(values["scales"], "scales", d),
        class_values=tuple(classes),
    )
    return TrainedModel(mu=_float_list(values["mu"], "mu", d + 1), params=params, nu=nu,
                        q_prime=q_prime, C=C, seed=int(values["seed"]), solver=values["solver"])


def write_model(model, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))


def read_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
