"""Observation matrices and their CSV representation.

On disk a dataset is a CSV file with one header row of variable names and one
row per sample. In memory it is a d x n matrix whose columns are samples.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DomainError


@dataclass
class DataMatrix:
    values: np.ndarray
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("DataMatrix values must be a d x n array")
        if not self.names:
            self.names = [f"x{i + 1}" for i in range(self.values.shape[0])]
        if len(self.names) != self.values.shape[0]:
            raise ValueError("one name per variable (row) is required")

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def columns(self, idx) -> "DataMatrix":
        return DataMatrix(self.values[:, idx], list(self.names))


def as_array(X) -> np.ndarray:
    """The d x n float array behind ``X`` (DataMatrix or array-like)."""
    if isinstance(X, DataMatrix):
        return X.values
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("data must be a d x n matrix")
    return X


def write_csv(path, X, names: Optional[List[str]] = None) -> None:
    """Write samples as rows; floats use their shortest round-trip repr."""
    if isinstance(X, DataMatrix):
        names = names or X.names
    values = as_array(X)
    if not names:
        names = DataMatrix(values).names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in values.T:
            w.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 2**53 and not np.signbit(v):
        return str(int(v))
    return repr(float(v))


def read_csv(path) -> DataMatrix:
    """Read a samples-as-rows CSV; rejects empty cells, NaN and inf with coordinates."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty file")
    names = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    out = np.empty((len(body), len(names)))
    for k, row in enumerate(body):
        if len(row) != len(names):
            raise DomainError(f"{path}: row {k + 2} has {len(row)} fields, expected {len(names)}")
        for i, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DomainError(
                    f"{path}: row {k + 2}, column {i + 1} ({names[i]}): not a number: {cell!r}"
                ) from None
            if not np.isfinite(v):
                raise DomainError(
                    f"{path}: row {k + 2}, column {i + 1} ({names[i]}): non-finite value {cell!r}"
                )
            out[k, i] = v
    return DataMatrix(out.T.copy(), names)
