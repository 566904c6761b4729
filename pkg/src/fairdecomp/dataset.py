"""Audit data model: column roles, validation, CSV I/O, stratified folds."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateOutcome, EmptyGroup, SchemaMismatch, TooFewUnits

ROLES = ("covariate", "treatment", "mediator", "outcome")


@dataclass(frozen=True)
class AuditDataset:
    """Column-oriented table of audit units.

    w: (n, q) pre-treatment covariates; a: (n,) binary protected attribute
    (1 = protected group); m: (n, p) mediators; y: (n,) binary outcome
    (1 = denial). Arrays are read-only after construction; missing values
    (NaN) are allowed until `validate` has run.
    """

    w: np.ndarray
    a: np.ndarray
    m: np.ndarray
    y: np.ndarray
    w_names: tuple[str, ...]
    m_names: tuple[str, ...]
    a_name: str = "a"
    y_name: str = "y"
    group_labels: tuple[str, str] = ("reference", "protected")

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        m = np.asarray(self.m, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(-1, 1)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        a = np.asarray(self.a, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        n = len(a)
        if not (w.shape[0] == m.shape[0] == len(y) == n):
            raise ValueError("w, a, m, y must have the same number of rows")
        if w.shape[1] != len(self.w_names) or m.shape[1] != len(self.m_names):
            raise ValueError("column names do not match matrix widths")
        for arr, name in ((w, "w"), (a, "a"), (m, "m"), (y, "y")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "w_names", tuple(self.w_names))
        object.__setattr__(self, "m_names", tuple(self.m_names))
        object.__setattr__(self, "group_labels", tuple(self.group_labels))

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def n_covariates(self) -> int:
        return self.w.shape[1]

    @property
    def n_mediators(self) -> int:
        return self.m.shape[1]


@dataclass(frozen=True)
class ValidationReport:
    """Row-drop accounting plus a coarse positivity screen."""

    n_input: int
    n_kept: int
    dropped: dict[str, int]
    positivity_min: float
    positivity_max: float
    n_positivity_cells: int
    dataset: AuditDataset

    @property
    def n_dropped(self) -> int:
        return sum(self.dropped.values())

    def to_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "n_kept": self.n_kept,
            "dropped": dict(self.dropped),
            "positivity_min": self.positivity_min,
            "positivity_max": self.positivity_max,
            "n_positivity_cells": self.n_positivity_cells,
        }


@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic stratified fold assignment; fold ids are 1..k."""

    k: int
    fold_of: np.ndarray
    seed: int

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=np.int64)
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def eval_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


_DROP_REASONS = (
    "missing covariate",
    "missing treatment",
    "missing mediator",
    "missing outcome",
    "non-binary treatment",
    "non-binary outcome",
)


def validate(dataset: AuditDataset) -> ValidationReport:
    """Drop incomplete or non-binary rows and screen positivity.

    Returns a report whose `.dataset` attribute holds the surviving rows
    with `a`/`y` coerced to clean 0/1 values. Validating an already-valid
    dataset drops nothing.
    """
    n = dataset.n
    reason = np.full(n, -1, dtype=np.int64)
    checks = (
        ~np.isfinite(dataset.w).all(axis=1),
        ~np.isfinite(dataset.a),
        ~np.isfinite(dataset.m).all(axis=1),
        ~np.isfinite(dataset.y),
        ~np.isin(dataset.a, (0.0, 1.0)),
        ~np.isin(dataset.y, (0.0, 1.0)),
    )
    for code, bad in enumerate(checks):
        reason[(reason == -1) & bad] = code
    keep = reason == -1
    dropped = {
        label: int((reason == code).sum())
        for code, label in enumerate(_DROP_REASONS)
        if (reason == code).any()
    }

    a = dataset.a[keep]
    y = dataset.y[keep]
    n_kept = int(keep.sum())
    if n_kept == 0 or a.sum() == 0 or a.sum() == n_kept:
        raise EmptyGroup(
            f"treatment arms after cleaning: a=1 count {int(a.sum())} of {n_kept}"
        )
    if y.min() == y.max():
        raise DegenerateOutcome(f"outcome is constant ({y[0]:g}) after cleaning")

    cleaned = AuditDataset(
        w=dataset.w[keep],
        a=a,
        m=dataset.m[keep],
        y=y,
        w_names=dataset.w_names,
        m_names=dataset.m_names,
        a_name=dataset.a_name,
        y_name=dataset.y_name,
        group_labels=dataset.group_labels,
    )
    pos_min, pos_max, n_cells = _positivity_screen(cleaned.w, cleaned.a)
    return ValidationReport(
        n_input=n,
        n_kept=n_kept,
        dropped=dropped,
        positivity_min=pos_min,
        positivity_max=pos_max,
        n_positivity_cells=n_cells,
        dataset=cleaned,
    )


def _positivity_screen(
    w: np.ndarray, a: np.ndarray, bins: int = 4, min_cell: int = 20
) -> tuple[float, float, int]:
    """Min/max of P(A=1 | W-cell) over coarse quantile cells of W."""
    n, q = w.shape
    if q == 0:
        return float(a.mean()), float(a.mean()), 1
    codes = np.zeros(n, dtype=np.int64)
    for j in range(q):
        col = w[:, j]
        edges = np.unique(np.quantile(col, np.linspace(0, 1, bins + 1)[1:-1]))
        codes = codes * (len(edges) + 1) + np.searchsorted(edges, col, side="right")
    _, inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=a)
    ok = counts >= min(min_cell, n)
    if not ok.any():
        ok = counts > 0
    rates = sums[ok] / counts[ok]
    return float(rates.min()), float(rates.max()), int(ok.sum())


def assign_folds(dataset: AuditDataset, k: int, seed: int) -> FoldAssignment:
    """Assign units to k folds, stratified jointly on (a, y).

    Strata are dealt cyclically with offsets chosen so that per-fold counts
    of a=1 units and of y=1 units each stay within +-1 of their share.
    Deterministic given (dataset, k, seed).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = dataset.n
    if n < 2 * k:
        raise TooFewUnits(f"n={n} is below the minimum 2k={2 * k}")
    a = dataset.a.astype(np.int64)
    y = dataset.y.astype(np.int64)
    rng = np.random.default_rng(seed)
    strata = [
        np.flatnonzero((a == 1) & (y == 1)),
        np.flatnonzero((a == 1) & (y == 0)),
        np.flatnonzero((a == 0) & (y == 1)),
        np.flatnonzero((a == 0) & (y == 0)),
    ]
    o1 = int(rng.integers(k))
    o4 = int(rng.integers(k))
    # Stacking S(1,0) and S(0,1) right after S(1,1)'s extras keeps both the
    # a=1 and the y=1 marginals within +-1 per fold.
    shared = (o1 + len(strata[0]) % k) % k
    offsets = (o1, shared, shared, o4)
    fold_of = np.empty(n, dtype=np.int64)
    for members, offset in zip(strata, offsets):
        order = rng.permutation(members)
        fold_of[order] = (offset + np.arange(len(order))) % k + 1
    counts = np.bincount(fold_of, minlength=k + 1)[1:]
    if (counts == 0).any():
        raise TooFewUnits(f"fold sizes {counts.tolist()} contain an empty fold")
    return FoldAssignment(k=k, fold_of=fold_of, seed=seed)


def write_dataset(dataset: AuditDataset, csv_path, schema_path) -> None:
    """Write the dataset as CSV plus a JSON sidecar mapping columns to roles."""
    header = (
        list(dataset.w_names) + [dataset.a_name] + list(dataset.m_names) + [dataset.y_name]
    )
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = (
                [_fmt(v) for v in dataset.w[i]]
                + [_fmt(dataset.a[i])]
                + [_fmt(v) for v in dataset.m[i]]
                + [_fmt(dataset.y[i])]
            )
            writer.writerow(row)
    roles = {name: "covariate" for name in dataset.w_names}
    roles[dataset.a_name] = "treatment"
    roles.update({name: "mediator" for name in dataset.m_names})
    roles[dataset.y_name] = "outcome"
    schema = {"columns": roles, "group_labels": list(dataset.group_labels)}
    Path(schema_path).write_text(json.dumps(schema, indent=2, sort_keys=True), encoding="utf-8")


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return ""
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def read_dataset(csv_path, schema_path) -> AuditDataset:
    """Read a dataset CSV with its JSON role sidecar (unvalidated).

    Empty fields and unparseable numbers become NaN and are handled by
    `validate`.
    """
    schema = json.loads(Path(schema_path).read_text(encoding="utf-8"))
    roles = schema.get("columns")
    if not isinstance(roles, dict):
        raise SchemaMismatch("schema sidecar must contain a 'columns' mapping")
    bad_roles = {r for r in roles.values() if r not in ROLES}
    if bad_roles:
        raise SchemaMismatch(f"unknown roles in schema: {sorted(bad_roles)}")
    if sum(1 for r in roles.values() if r == "treatment") != 1:
        raise SchemaMismatch("schema must declare exactly one treatment column")
    if sum(1 for r in roles.values() if r == "outcome") != 1:
        raise SchemaMismatch("schema must declare exactly one outcome column")

    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch("dataset CSV is empty") from None
        missing = [c for c in roles if c not in header]
        if missing:
            raise SchemaMismatch(f"CSV is missing schema columns: {missing}")
        extra = [c for c in header if c not in roles]
        if extra:
            raise SchemaMismatch(f"CSV has columns absent from schema: {extra}")
        rows = [[_parse(v) for v in row] for row in reader]

    data = (
        np.asarray(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(header)), dtype=np.float64)
    )
    w_names = tuple(c for c in header if roles[c] == "covariate")
    m_names = tuple(c for c in header if roles[c] == "mediator")
    a_name = next(c for c in header if roles[c] == "treatment")
    y_name = next(c for c in header if roles[c] == "outcome")
    col = {c: i for i, c in enumerate(header)}
    labels = schema.get("group_labels", ["reference", "protected"])
    return AuditDataset(
        w=data[:, [col[c] for c in w_names]],
        a=data[:, col[a_name]],
        m=data[:, [col[c] for c in m_names]],
        y=data[:, col[y_name]],
        w_names=w_names,
        m_names=m_names,
        a_name=a_name,
        y_name=y_name,
        group_labels=(labels[0], labels[1]),
    )


def _parse(v: str) -> float:
    v = v.strip()
    if not v:
        return math.nan
    try:
        return float(v)
    except ValueError:
        return math.nan
