"""CSV and JSON carriers.

Logit CSV:   header ``class_0,...,class_{K-1},label``; one row per sample.
Feature CSV: header ``f_0,...,f_{d-1},label``; one row per sample.
JSON documents always carry a ``version`` field and are written with sorted keys.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed input file; the message names the offending row/column."""


def _read_table(path, prefix: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "label":
            raise FormatError(f"{path}: header must end with 'label'")
        width = len(header) - 1
        expected = [f"{prefix}{i}" for i in range(width)]
        if header[:-1] != expected:
            raise FormatError(f"{path}: header columns must be {prefix}0..{prefix}{width - 1}")
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width + 1:
                raise FormatError(f"{path}: row {lineno} has {len(row)} cells, expected {width + 1}")
            vals = []
            for col, cell in enumerate(row[:-1]):
                try:
                    v = float(cell)
                except ValueError:
                    raise FormatError(f"{path}: row {lineno}, column {header[col]}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise FormatError(f"{path}: row {lineno}, column {header[col]}: non-finite value")
                vals.append(v)
            try:
                label = int(row[-1])
            except ValueError:
                raise FormatError(f"{path}: row {lineno}, column label: not an integer: {row[-1]!r}") from None
            values.append(vals)
            labels.append(label)
    x = np.asarray(values, dtype=np.float64).reshape(len(values), width)
    return x, np.asarray(labels, dtype=np.int64)


def read_logit_csv(path) -> tuple[np.ndarray, np.ndarray]:
    logits, labels = _read_table(path, "class_")
    k = logits.shape[1]
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        raise FormatError(f"{path}: row {int(bad[0]) + 2}, column label: {labels[bad[0]]} outside [0, {k})")
    return logits, labels


def read_feature_csv(path) -> tuple[np.ndarray, np.ndarray]:
    feats, labels = _read_table(path, "f_")
    if labels.size and labels.min() < 0:
        raise FormatError(f"{path}: negative label")
    return feats, labels


def _write_table(path, prefix: str, x: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{i}" for i in range(x.shape[1])] + ["label"])
        for row, y in zip(x, labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])


def write_logit_csv(path, logits: np.ndarray, labels: np.ndarray) -> None:
    _write_table(path, "class_", logits, labels)


def write_feature_csv(path, features: np.ndarray, labels: np.ndarray) -> None:
    _write_table(path, "f_", features, labels)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def dumps(doc: dict[str, Any]) -> str:
    doc = {"version": FORMAT_VERSION, **doc}
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, doc: dict[str, Any]) -> None:
    Path(path).write_text(dumps(doc))
