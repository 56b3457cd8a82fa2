"""Dataset container and CSV serialization.

One schema covers both synthetic draws (univariate x) and external tabular
data (multivariate x): covariates are always stored as an (n, d) float array,
subgroups as integer codes into a category list, labels as 0/1, and an
optional selection flag column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# 17 significant digits round-trips IEEE doubles exactly.
_FLOAT_FMT = "%.17g"


@dataclass
class Dataset:
    """Rows of (x, a, y[, s]) with a shared subgroup category list."""

    x: np.ndarray                      # (n, d) float64
    a: np.ndarray                      # (n,) integer codes into `categories`
    y: np.ndarray                      # (n,) 0/1
    s: Optional[np.ndarray] = None     # (n,) 0/1 selection flags, if any
    categories: tuple = field(default=(0, 1))

    def __post_init__(self) -> None:
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if self.x.shape[0] == 1 and self.x.shape[1] == len(self.a) != 1:
            self.x = self.x.T
        self.a = np.asarray(self.a, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.s is not None:
            self.s = np.asarray(self.s, dtype=np.int64)
        self.categories = tuple(self.categories)
        n = self.x.shape[0]
        if not (len(self.a) == len(self.y) == n):
            raise ValueError(f"column lengths differ: x={n} a={len(self.a)} y={len(self.y)}")
        if self.s is not None and len(self.s) != n:
            raise ValueError(f"selection column length {len(self.s)} != {n}")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("y must be binary 0/1")
        if self.a.min(initial=0) < 0 or self.a.max(initial=0) >= len(self.categories):
            raise ValueError("subgroup codes out of range for declared categories")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subgroup_mask(self, code: int) -> np.ndarray:
        return self.a == code

    def subset(self, mask: np.ndarray) -> "Dataset":
        s = self.s[mask] if self.s is not None else None
        return Dataset(self.x[mask], self.a[mask], self.y[mask], s, self.categories)

    def label_of(self, code: int):
        return self.categories[code]


def write_csv(dataset: Dataset, path) -> None:
    """Write `x0[,x1,...],a,y[,s]` with floats at 17 significant digits."""
    d = dataset.n_features
    header = [f"x{j}" for j in range(d)] + ["a", "y"]
    if dataset.s is not None:
        header.append("s")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [_FLOAT_FMT % v for v in dataset.x[i]]
            row.append(str(dataset.label_of(dataset.a[i])))
            row.append(str(int(dataset.y[i])))
            if dataset.s is not None:
                row.append(str(int(dataset.s[i])))
            writer.writerow(row)


def read_csv(
    path,
    x_columns: Optional[Sequence[str]] = None,
    a_column: str = "a",
    y_column: str = "y",
    s_column: Optional[str] = "s",
) -> Dataset:
    """Read a dataset CSV; by default uses the `x0...,a,y[,s]` layout.

    External files may declare their own column mapping. Subgroup labels are
    kept as strings unless every label parses as an integer.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    index = {name: j for j, name in enumerate(header)}
    if x_columns is None:
        x_columns = [name for name in header if name.startswith("x")]
    missing = [c for c in (*x_columns, a_column, y_column) if c not in index]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    xj = [index[c] for c in x_columns]
    x = np.array([[float(row[j]) for j in xj] for row in rows])
    raw_a = [row[index[a_column]] for row in rows]
    try:
        labels = sorted({int(v) for v in raw_a})
        codes = np.array([labels.index(int(v)) for v in raw_a])
    except ValueError:
        labels = sorted(set(raw_a))
        codes = np.array([labels.index(v) for v in raw_a])
    y = np.array([int(float(row[index[y_column]])) for row in rows])
    s = None
    if s_column is not None and s_column in index:
        s = np.array([int(float(row[index[s_column]])) for row in rows])
    return Dataset(x, codes, y, s, tuple(labels))
