"""Tabular ingestion, one-hot encoding, [-1, 1] scaling and label-aware splits."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import _rng
from .exceptions import MCGenWarning, ValidationError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class OneHotGroup:
    """Columns produced from one categorical source column."""

    source: str
    categories: tuple[str, ...]


@dataclass(frozen=True)
class Encoding:
    """What ``one_hot_encode`` did, kept so synthetic rows can be decoded."""

    source_names: tuple[str, ...]
    source_kinds: tuple[str, ...]
    label_name: str
    groups: tuple[OneHotGroup, ...]


@dataclass(frozen=True)
class Table:
    column_names: tuple[str, ...]
    column_kinds: tuple[str, ...]
    rows: tuple[tuple, ...]
    label_column: int
    encoding: Encoding | None = None

    def __post_init__(self):
        ncol = len(self.column_names)
        if len(self.column_kinds) != ncol:
            raise ValidationError("Table", "column_kinds and column_names differ in length")
        if not 0 <= self.label_column < ncol:
            raise ValidationError("Table", f"label_column {self.label_column} out of range")
        if self.column_kinds[self.label_column] != CATEGORICAL:
            raise ValidationError("Table", "label column must be categorical")
        for i, row in enumerate(self.rows):
            if len(row) != ncol:
                raise ValidationError("Table", f"row {i} has {len(row)} values, expected {ncol}")
            for j, kind in enumerate(self.column_kinds):
                if kind == NUMERIC and not math.isfinite(row[j]):
                    raise ValidationError("Table", f"non-finite value in row {i}, column {self.column_names[j]!r}")

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def d(self) -> int:
        return len(self.column_names)

    @property
    def label_name(self) -> str:
        return self.column_names[self.label_column]

    @property
    def feature_columns(self) -> list[int]:
        return [j for j in range(self.d) if j != self.label_column]

    def column(self, j: int) -> list:
        return [row[j] for row in self.rows]

    def labels(self) -> np.ndarray:
        return np.array(self.column(self.label_column), dtype=object)

    def feature_matrix(self) -> np.ndarray:
        cols = self.feature_columns
        bad = [self.column_names[j] for j in cols if self.column_kinds[j] != NUMERIC]
        if bad:
            raise ValidationError("scale_to_unit", f"categorical features {bad} must be one-hot encoded first")
        if not self.rows:
            return np.empty((0, len(cols)))
        return np.array([[row[j] for j in cols] for row in self.rows], dtype=float)


@dataclass(frozen=True)
class ScaledTable:
    """Features scaled to [-1, 1] plus the (min, max) needed to undo it."""

    feature_names: tuple[str, ...]
    values: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray
    labels: np.ndarray
    label_name: str = "label"
    constant_features: tuple[int, ...] = ()
    encoding: Encoding | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError("ScaledTable", "values must be a 2-d grid")
        n, d = values.shape
        if d < 2:
            raise ValidationError("ScaledTable", f"need at least 2 features, got {d}")
        if len(self.feature_names) != d or len(self.mins) != d or len(self.maxs) != d:
            raise ValidationError("ScaledTable", "feature_names/mins/maxs do not match the value grid")
        if len(self.labels) != n:
            raise ValidationError("ScaledTable", "labels length differs from row count")
        if not np.all(np.isfinite(values)):
            raise ValidationError("ScaledTable", "values must be finite")
        if n and (values.min() < -1.0 or values.max() > 1.0):
            raise ValidationError("ScaledTable", "values must lie in [-1, 1]")
        if np.any(np.asarray(self.mins) > np.asarray(self.maxs)):
            raise ValidationError("ScaledTable", "min > max for some feature")
        values = values.copy()
        values.flags.writeable = False
        labels = np.asarray(self.labels, dtype=object).copy()
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=float))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=float))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def subset(self, rows) -> "ScaledTable":
        rows = np.asarray(rows, dtype=int)
        return ScaledTable(
            self.feature_names,
            self.values[rows],
            self.mins,
            self.maxs,
            self.labels[rows],
            self.label_name,
            self.constant_features,
            self.encoding,
        )

    def inverse_values(self, values=None) -> np.ndarray:
        return inverse_scale(self.values if values is None else values, self.mins, self.maxs)


@dataclass(frozen=True)
class SplitSpec:
    seed_fraction: float
    scenario: int
    rng_seed: int

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValidationError("SplitSpec", f"scenario must be 1 or 2, got {self.scenario}")
        if not 0.0 < self.seed_fraction < 1.0:
            raise ValidationError("SplitSpec", f"seed_fraction must be in (0, 1), got {self.seed_fraction}")

    @classmethod
    def for_scenario(cls, scenario: int, rng_seed: int = 0, seed_fraction: float | None = None) -> "SplitSpec":
        if seed_fraction is None:
            seed_fraction = {1: 0.20, 2: 0.80}.get(scenario, 0.5)
        return cls(seed_fraction, scenario, rng_seed)


def _parse_number(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, label: str | None = None, kinds: dict[str, str] | None = None) -> Table:
    """Read a headered CSV into a :class:`Table`.

    A column is numeric iff every non-empty cell parses as a number, unless
    ``kinds`` pins it. The label column (default: last) is always categorical.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        records = list(csv.reader(fh))
    records = [r for r in records if r]
    if not records:
        raise ValidationError("load_csv", f"{path} is empty")
    header, body = records[0], records[1:]
    ncol = len(header)
    if ncol == 0:
        raise ValidationError("load_csv", "header row has no columns")
    for i, rec in enumerate(body, start=2):
        if len(rec) != ncol:
            raise ValidationError("load_csv", f"ragged row {i}: {len(rec)} fields, header has {ncol}")

    if label is None:
        label_col = ncol - 1
    elif label in header:
        label_col = header.index(label)
    else:
        raise ValidationError("load_csv", f"label column {label!r} not in header")

    kinds = dict(kinds or {})
    column_kinds = []
    for j, name in enumerate(header):
        if j == label_col:
            column_kinds.append(CATEGORICAL)
        elif name in kinds:
            if kinds[name] not in (NUMERIC, CATEGORICAL):
                raise ValidationError("load_csv", f"unknown kind {kinds[name]!r} for {name!r}")
            column_kinds.append(kinds[name])
        else:
            cells = [rec[j].strip() for rec in body if rec[j].strip() != ""]
            numeric = bool(cells) and all(_parse_number(c) is not None for c in cells)
            column_kinds.append(NUMERIC if numeric else CATEGORICAL)

    rows = []
    for i, rec in enumerate(body, start=2):
        row = []
        for j, cell in enumerate(rec):
            cell = cell.strip()
            if column_kinds[j] == NUMERIC:
                value = _parse_number(cell)
                if value is None or not math.isfinite(value):
                    raise ValidationError(
                        "load_csv", f"row {i}, column {header[j]!r}: cannot parse {cell!r} as a finite number"
                    )
                row.append(value)
            else:
                row.append(cell)
        rows.append(tuple(row))
    return Table(tuple(header), tuple(column_kinds), tuple(rows), label_col)


def one_hot_encode(t: Table) -> Table:
    """Replace each categorical feature by 0/1 columns, one per distinct value.

    Categories are ordered by first appearance; new columns are named
    ``"<column>=<value>"`` and sit where the source column was.
    """
    names, kinds, groups = [], [], []
    label_col = None
    col_builders = []
    for j, (name, kind) in enumerate(zip(t.column_names, t.column_kinds)):
        if j == t.label_column:
            label_col = len(names)
            names.append(name)
            kinds.append(CATEGORICAL)
            col_builders.append(lambda row, j=j: (row[j],))
            continue
        if kind == NUMERIC:
            names.append(name)
            kinds.append(NUMERIC)
            col_builders.append(lambda row, j=j: (row[j],))
            continue
        categories = list(dict.fromkeys(t.column(j)))
        if len(categories) == 1:
            warnings.warn(f"categorical column {name!r} has a single value; encoded as a constant column", MCGenWarning)
        groups.append(OneHotGroup(name, tuple(categories)))
        names.extend(f"{name}={c}" for c in categories)
        kinds.extend([NUMERIC] * len(categories))
        col_builders.append(lambda row, j=j, cats=tuple(categories): tuple(float(row[j] == c) for c in cats))

    if not groups:
        return t
    rows = tuple(tuple(v for build in col_builders for v in build(row)) for row in t.rows)
    encoding = Encoding(t.column_names, t.column_kinds, t.label_name, tuple(groups))
    return Table(tuple(names), tuple(kinds), rows, label_col, encoding)


def _scale_columns(x: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    span = maxs - mins
    constant = span == 0
    safe = np.where(constant, 1.0, span)
    out = 2.0 * (x - mins) / safe - 1.0
    out[:, constant] = 0.0
    return out


def inverse_scale(values, mins, maxs) -> np.ndarray:
    """Undo the [-1, 1] map; constant features come back as their single value."""
    values = np.asarray(values, dtype=float)
    mins = np.asarray(mins, dtype=float)
    maxs = np.asarray(maxs, dtype=float)
    return (values + 1.0) / 2.0 * (maxs - mins) + mins


def scale_to_unit(t: Table) -> ScaledTable:
    """Affinely map every feature onto [-1, 1] using its own min and max."""
    x = t.feature_matrix()
    if x.shape[0] == 0:
        raise ValidationError("scale_to_unit", "table has no rows")
    mins, maxs = x.min(axis=0), x.max(axis=0)
    constant = tuple(int(j) for j in np.flatnonzero(maxs == mins))
    names = tuple(t.column_names[j] for j in t.feature_columns)
    if constant:
        warnings.warn(f"constant features mapped to 0: {[names[j] for j in constant]}", MCGenWarning)
    values = np.clip(_scale_columns(x, mins, maxs), -1.0, 1.0)
    return ScaledTable(names, values, mins, maxs, t.labels(), t.label_name, constant, t.encoding)


def apply_scaling(t: Table, reference: ScaledTable) -> ScaledTable:
    """Scale ``t`` with the (min, max) stored in ``reference``.

    Values outside the reference range are clipped into [-1, 1].
    """
    x = t.feature_matrix()
    values = np.clip(_scale_columns(x, reference.mins, reference.maxs), -1.0, 1.0)
    return ScaledTable(
        reference.feature_names,
        values,
        reference.mins,
        reference.maxs,
        t.labels(),
        reference.label_name,
        reference.constant_features,
        reference.encoding,
    )


def subset_table(t: Table, rows: Sequence[int]) -> Table:
    return Table(t.column_names, t.column_kinds, tuple(t.rows[i] for i in rows), t.label_column, t.encoding)


def split_by_label(s: ScaledTable) -> dict:
    """Partition rows by class, sorted by label, preserving row order."""
    out = {}
    for label in sorted(set(s.labels.tolist())):
        out[label] = s.subset(np.flatnonzero(s.labels == label))
    return out


def stratified_indices(labels, seed_fraction: float, rng_seed: int):
    """Row indices ``(seed, holdout, singletons)`` of a stratified random split.

    Each class contributes ``round(seed_fraction * n_class)`` rows to the seed
    side. Single-row classes go to whichever side is larger and are reported
    in ``singletons``.
    """
    labels = np.asarray(labels, dtype=object)
    rng = _rng.substream(rng_seed, _rng.SPLIT)
    seed_idx, holdout_idx, singletons = [], [], []
    for label in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == label)
        if len(idx) == 1:
            singletons.append(label)
            (seed_idx if seed_fraction >= 0.5 else holdout_idx).extend(idx.tolist())
            continue
        perm = rng.permutation(idx)
        take = int(math.floor(seed_fraction * len(idx) + 0.5))
        seed_idx.extend(perm[:take].tolist())
        holdout_idx.extend(perm[take:].tolist())
    return np.sort(np.array(seed_idx, dtype=int)), np.sort(np.array(holdout_idx, dtype=int)), singletons


def split_train_seed(s: ScaledTable, spec: SplitSpec):
    """Stratified ``(seed, holdout)`` split, reproducible from ``spec.rng_seed``."""
    if s.n < 2:
        raise ValidationError("split_train_seed", "need at least 2 rows to split")
    seed_idx, holdout_idx, singletons = stratified_indices(s.labels, spec.seed_fraction, spec.rng_seed)
    if singletons:
        warnings.warn(f"single-sample classes {singletons} not split", MCGenWarning)
    return s.subset(seed_idx), s.subset(holdout_idx)


def decode_rows(values: np.ndarray, labels, encoding: Encoding | None, feature_names, label_name: str):
    """Turn an unscaled feature grid back into rows of the source schema.

    One-hot groups are decoded by argmax. Returns ``(header, rows)``.
    """
    values = np.asarray(values, dtype=float)
    labels = list(labels)
    if encoding is None:
        header = list(feature_names) + [label_name]
        rows = [list(map(float, v)) + [lab] for v, lab in zip(values, labels)]
        return header, rows

    position = {name: i for i, name in enumerate(feature_names)}
    groups = {g.source: g for g in encoding.groups}
    extractors = []
    for name in encoding.source_names:
        if name == encoding.label_name:
            extractors.append(None)
        elif name in groups:
            cats = groups[name].categories
            cols = [position[f"{name}={c}"] for c in cats]
            extractors.append(lambda row, cols=cols, cats=cats: cats[int(np.argmax(row[cols]))])
        else:
            col = position[name]
            extractors.append(lambda row, col=col: float(row[col]))
    rows = []
    for v, lab in zip(values, labels):
        rows.append([lab if ex is None else ex(v) for ex in extractors])
    return list(encoding.source_names), rows


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


class UnitScaler(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Scale each column of an array onto [-1, 1].

    Constant columns map to 0. With ``clip=True`` (default) values outside the
    fitted range are clamped, so transformed data always lies in [-1, 1].

    Attributes
    ----------
    data_min_, data_max_ : ndarray of shape (n_features,)
    constant_ : ndarray of bool
    """

    def __init__(self, clip=True):
        self.clip = clip

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.constant_ = self.data_max_ == self.data_min_
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        out = _scale_columns(X, self.data_min_, self.data_max_)
        return np.clip(out, -1.0, 1.0) if self.clip else out

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        return inverse_scale(X, self.data_min_, self.data_max_)
