"""Tabular ingestion, design-matrix expansion and standardization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input tables or design specifications."""


@dataclass(frozen=True)
class DataTable:
    """Named columns of equal length. Numeric columns are float arrays,
    categorical columns are object arrays of strings."""

    names: tuple[str, ...]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate column names")
        if set(self.names) != set(self.columns):
            raise DataError("column names do not match column data")
        lengths = {len(self.columns[k]) for k in self.names}
        if len(lengths) > 1:
            raise DataError("columns have unequal lengths")

    @property
    def n(self) -> int:
        return len(self.columns[self.names[0]]) if self.names else 0

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def is_numeric(self, name: str) -> bool:
        return self[name].dtype.kind == "f"

    @classmethod
    def from_dict(cls, data: dict[str, Sequence]) -> "DataTable":
        cols = {}
        for k, v in data.items():
            arr = np.asarray(v)
            if arr.dtype.kind in "iub":
                arr = arr.astype(float)
            elif arr.dtype.kind != "f":
                arr = arr.astype(object)
            cols[k] = arr
        return cls(tuple(data), cols)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for i in range(self.n):
                w.writerow([_fmt(self.columns[k][i]) for k in self.names])


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def load_table(path: str | Path) -> DataTable:
    """Read a header-first, comma-separated UTF-8 file.

    Columns whose every cell parses as a float become numeric; anything else
    is kept as a categorical column of strings. Empty cells are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("empty table")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise DataError("empty table")
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"ragged rows: line {lineno} has {len(r)} fields, expected {len(header)}")
    if len(set(header)) != len(header):
        raise DataError("duplicate column names")

    columns = {}
    for j, name in enumerate(header):
        raw = [r[j].strip() for r in body]
        if any(cell == "" for cell in raw):
            raise DataError(f"missing value in column {name!r}")
        try:
            columns[name] = np.array([float(c) for c in raw])
        except ValueError:
            columns[name] = np.array(raw, dtype=object)
    return DataTable(tuple(header), columns)


@dataclass(frozen=True)
class RegressionData:
    """Response ``y``, treatment ``z`` and control matrix ``X`` (n x p)."""

    y: np.ndarray
    z: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        z = np.asarray(self.z, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else np.empty((len(y), 0))
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        if not (len(y) == len(z) == X.shape[0]):
            raise DataError(f"dimension mismatch: len(y)={len(y)}, len(z)={len(z)}, X has {X.shape[0]} rows")
        for name, arr in (("y", y), ("z", z), ("X", X)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError("feature_names length does not match X columns")
        for arr in (y, z, X):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizationInfo:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    z_mean: float

    def __post_init__(self):
        if np.any(np.asarray(self.x_scale) <= 0):
            raise DataError("scale factors must be strictly positive")

    def coef_to_original(self, beta: np.ndarray) -> np.ndarray:
        """Map control coefficients fitted on standardized X back to raw units."""
        return np.asarray(beta, dtype=float) / self.x_scale

    def coef_to_standardized(self, beta: np.ndarray) -> np.ndarray:
        return np.asarray(beta, dtype=float) * self.x_scale

    def intercept(self, alpha: float, beta_original: np.ndarray) -> float:
        """Intercept implied on the raw scale by centered-data coefficients."""
        return self.y_mean - alpha * self.z_mean - float(self.x_mean @ beta_original)


def standardize(data: RegressionData) -> tuple[RegressionData, StandardizationInfo]:
    """Center y and z; center X and scale each column to unit sample variance."""
    X = data.X
    mean = X.mean(axis=0)
    Xc = X - mean
    scale = Xc.std(axis=0, ddof=1) if data.n > 1 else np.zeros(data.p)
    bad = [data.feature_names[j] for j in np.flatnonzero(~(scale > 1e-12 * (1 + np.abs(mean))))]
    if bad:
        raise DataError(f"zero variance in column(s): {', '.join(bad)}")
    y_mean, z_mean = float(data.y.mean()), float(data.z.mean())
    out = RegressionData(data.y - y_mean, data.z - z_mean, Xc / scale, data.feature_names)
    return out, StandardizationInfo(mean, scale, y_mean, z_mean)


# --- design specification -------------------------------------------------

TRENDS = ("linear", "quadratic")


@dataclass(frozen=True)
class DummySpec:
    column: str
    drop: tuple[str, ...] = ()  # levels removed in addition to the reference


@dataclass(frozen=True)
class InteractionRule:
    """Products of a set of design columns with a polynomial time trend.

    ``columns`` is ``"controls"`` for the base controls, the name of a dummy
    column for all of its generated indicators, or an explicit list.
    """

    columns: str | tuple[str, ...]
    time: str
    trend: str = "linear"
    center_time: bool = False

    def __post_init__(self):
        if self.trend not in TRENDS:
            raise DataError(f"unknown trend {self.trend!r}; expected one of {TRENDS}")


@dataclass(frozen=True)
class DesignSpec:
    response: str
    treatment: str
    controls: tuple[str, ...] = ()
    dummies: tuple[DummySpec, ...] = ()
    interactions: tuple[InteractionRule, ...] = ()
    standardize: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        known = {"response", "treatment", "controls", "dummies", "interactions", "standardize"}
        extra = set(d) - known
        if extra:
            raise DataError(f"unknown design keys: {sorted(extra)}")
        try:
            dummies = []
            for item in d.get("dummies", []):
                if isinstance(item, str):
                    dummies.append(DummySpec(item))
                else:
                    dummies.append(DummySpec(item["column"], tuple(str(x) for x in item.get("drop", ()))))
            rules = []
            for item in d.get("interactions", []):
                cols = item["columns"]
                rules.append(InteractionRule(
                    cols if isinstance(cols, str) else tuple(cols),
                    item["time"], item.get("trend", "linear"), bool(item.get("center_time", False)),
                ))
            return cls(d["response"], d["treatment"], tuple(d.get("controls", ())),
                       tuple(dummies), tuple(rules), bool(d.get("standardize", False)))
        except KeyError as e:
            raise DataError(f"design spec missing key {e.args[0]!r}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "DesignSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _level_str(x) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


def _sorted_levels(values: np.ndarray) -> list:
    uniq = set(values.tolist())
    if values.dtype.kind == "f":
        return sorted(uniq)
    return sorted(uniq, key=str)


def build_design(table: DataTable, spec: DesignSpec) -> RegressionData:
    """Expand a table into (y, z, X) following ``spec``.

    Column order: base controls, dummy indicators (one reference level dropped
    per categorical, first in sorted order), then interactions in rule order.
    """
    for name in (spec.response, spec.treatment, *spec.controls):
        table[name]
        if not table.is_numeric(name):
            raise DataError(f"column {name!r} must be numeric")

    names: list[str] = []
    cols: list[np.ndarray] = []

    def add(name, col):
        if name in names:
            raise DataError(f"duplicate generated name {name!r}")
        names.append(name)
        cols.append(np.asarray(col, dtype=float))

    for c in spec.controls:
        add(c, table[c])

    groups: dict[str, list[str]] = {}
    for d in spec.dummies:
        values = table[d.column]
        levels = _sorted_levels(values)
        if len(levels) < 2:
            raise DataError(f"categorical column {d.column!r} has a single level")
        labels = [_level_str(lv) for lv in levels]
        unknown = set(d.drop) - set(labels)
        if unknown:
            raise DataError(f"cannot drop unknown level(s) {sorted(unknown)} of {d.column!r}")
        groups[d.column] = []
        for lv, lab in zip(levels[1:], labels[1:]):
            if lab in d.drop:
                continue
            gname = f"{d.column}[{lab}]"
            add(gname, values == lv)
            groups[d.column].append(gname)

    base = dict(zip(names, cols))
    for rule in spec.interactions:
        t = table[rule.time]
        if not table.is_numeric(rule.time):
            raise DataError(f"time column {rule.time!r} must be numeric")
        t = t - t.mean() if rule.center_time else t
        term, suffix = (t, rule.time) if rule.trend == "linear" else (t**2, f"{rule.time}^2")
        if isinstance(rule.columns, str):
            if rule.columns == "controls":
                targets = list(spec.controls)
            elif rule.columns in groups:
                targets = groups[rule.columns]
            else:
                raise DataError(f"unknown interaction group {rule.columns!r}")
        else:
            targets = list(rule.columns)
        for c in targets:
            if c not in base:
                raise DataError(f"unknown column {c!r} in interaction")
            add(f"{c}:{suffix}", base[c] * term)

    X = np.column_stack(cols) if cols else np.empty((table.n, 0))
    return RegressionData(table[spec.response], table[spec.treatment], X, tuple(names))


def prepare(table: DataTable, spec: DesignSpec) -> tuple[RegressionData, StandardizationInfo | None]:
    """``build_design`` followed by ``standardize`` when the spec asks for it."""
    data = build_design(table, spec)
    if spec.standardize:
        return standardize(data)
    return data, None
