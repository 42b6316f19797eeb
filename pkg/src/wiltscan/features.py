"""Feature matrices and the ``features.csv`` table written by ``extract``.

Feature columns are named ``<group>:<feature>``, e.g. ``multispectral:717``
or ``vi_multispectral:NDRE``; the prefix is the fusion group the column
belongs to.
"""
import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import IOFailure, SchemaError, ShapeError

META_COLUMNS = ["plot_id", "time_point", "wilt_score", "growth_stage", "status"]


@dataclass
class FeatureMatrix:
    values: np.ndarray
    names: List[str]
    labels: Optional[np.ndarray] = None
    row_ids: Optional[List[str]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError("feature matrix must be 2-D")
        if self.values.shape[1] != len(self.names):
            raise ShapeError(f"{self.values.shape[1]} columns but {len(self.names)} names")
        if len(set(self.names)) != len(self.names):
            raise ShapeError("feature names must be unique")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.values.shape[0]:
                raise ShapeError("label vector length differs from row count")

    @property
    def n_rows(self):
        return self.values.shape[0]

    def columns(self, names):
        index = {n: i for i, n in enumerate(self.names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise SchemaError(f"unknown feature columns: {missing}")
        cols = [index[n] for n in names]
        return FeatureMatrix(self.values[:, cols], list(names), self.labels, self.row_ids)

    def rows(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return FeatureMatrix(
            self.values[idx],
            list(self.names),
            None if self.labels is None else self.labels[idx],
            None if self.row_ids is None else [self.row_ids[i] for i in idx],
        )

    def with_labels(self, labels):
        return FeatureMatrix(self.values, list(self.names), labels, self.row_ids)


def group_of(name):
    return name.split(":", 1)[0]


@dataclass
class FeatureTable:
    """One row per (plot, time point) with metadata and feature columns.

    Rows whose extraction failed keep their metadata, carry a non-empty
    ``status`` and NaN features.
    """

    plot_ids: List[str]
    time_points: List[str]
    wilt_scores: List[int]
    growth_stages: List[str]
    status: List[str]
    names: List[str]
    values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.plot_ids)

    def groups(self):
        seen = []
        for n in self.names:
            g = group_of(n)
            if g not in seen:
                seen.append(g)
        return seen

    def group_columns(self, group):
        return [n for n in self.names if group_of(n) == group]

    def select_rows(self, mask):
        idx = np.flatnonzero(mask)
        return FeatureTable(
            [self.plot_ids[i] for i in idx],
            [self.time_points[i] for i in idx],
            [self.wilt_scores[i] for i in idx],
            [self.growth_stages[i] for i in idx],
            [self.status[i] for i in idx],
            list(self.names),
            self.values[idx],
        )

    def ok_rows(self):
        return self.select_rows(np.array([s == "" for s in self.status], dtype=bool))

    def at_time_point(self, time_point):
        return self.select_rows(np.array([t == time_point for t in self.time_points], dtype=bool))

    def matrix(self, columns=None, labels=None):
        columns = list(self.names) if columns is None else list(columns)
        index = {n: i for i, n in enumerate(self.names)}
        missing = [c for c in columns if c not in index]
        if missing:
            raise SchemaError(f"unknown feature columns: {missing}")
        vals = self.values[:, [index[c] for c in columns]] if columns else np.zeros((len(self), 0))
        return FeatureMatrix(vals, columns, labels, list(self.plot_ids))


def _fmt(v):
    if np.isnan(v):
        return ""
    return repr(float(v))


def write_features_csv(table, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(META_COLUMNS + list(table.names))
    for i in range(len(table)):
        w.writerow(
            [table.plot_ids[i], table.time_points[i], table.wilt_scores[i],
             table.growth_stages[i], table.status[i]]
            + [_fmt(v) for v in table.values[i]]
        )
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def read_features_csv(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][: len(META_COLUMNS)] != META_COLUMNS:
        raise SchemaError(f"{path}: header must start with {','.join(META_COLUMNS)}")
    names = rows[0][len(META_COLUMNS):]
    body = rows[1:]
    values = np.full((len(body), len(names)), np.nan)
    for i, r in enumerate(body):
        if len(r) != len(rows[0]):
            raise SchemaError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(rows[0])}")
        for j, cell in enumerate(r[len(META_COLUMNS):]):
            if cell != "":
                values[i, j] = float(cell)
    return FeatureTable(
        [r[0] for r in body],
        [r[1] for r in body],
        [int(r[2]) for r in body],
        [r[3] for r in body],
        [r[4] for r in body],
        names,
        values,
    )
