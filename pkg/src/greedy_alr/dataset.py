"""CSV ingestion, one-hot encoding, z-scoring and pool construction."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

MISSING_TOKENS = frozenset({"", "?", "na", "nan", "null", "none"})


class DatasetError(ValueError):
    """Raised for malformed input tables or infeasible pool requests."""


@dataclass(frozen=True)
class ColumnSpec:
    """Which column is the label, which are categorical, which are ignored.

    Every other column is read as a numeric feature.
    """

    label: str
    categorical: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSpec":
        if "label" not in d:
            raise DatasetError("column spec needs a 'label' entry")
        return cls(
            label=str(d["label"]),
            categorical=tuple(str(c) for c in d.get("categorical", ())),
            exclude=tuple(str(c) for c in d.get("exclude", ())),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ColumnSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class RawTable:
    """Typed rows as read from disk, before any encoding.

    ``rows`` holds floats for numeric columns and stripped strings for
    categorical ones. ``labels`` is the label column, kept separately.
    """

    names: list[str]
    kinds: list[str]
    rows: list[list]
    labels: np.ndarray
    label_name: str

    def __post_init__(self):
        width = len(self.names)
        if len(self.kinds) != width:
            raise DatasetError("names and kinds differ in length")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise DatasetError(f"row {i}: expected {width} fields, got {len(row)}")
        if len(self.labels) != len(self.rows):
            raise DatasetError("label count does not match row count")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_numeric(self) -> int:
        return sum(k == NUMERIC for k in self.kinds)

    @property
    def n_categorical(self) -> int:
        return sum(k == CATEGORICAL for k in self.kinds)


@dataclass
class Dataset:
    """Encoded, normalized feature matrix plus labels.

    ``encoding_map`` maps ``(source column, level)`` to the feature column
    that level was expanded into. Levels whose column turned out constant
    are absent from it and listed in ``dropped``.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    encoding_map: dict[tuple[str, str], int] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)
    means: np.ndarray | None = None
    scales: np.ndarray | None = None
    name: str = ""

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def to_csv(self, path: str | Path, label_name: str = "label") -> None:
        """Dump the normalized matrix and labels for auditing."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([*self.feature_names, label_name])
            for x, y in zip(self.features, self.labels):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


@dataclass(frozen=True)
class PoolSpec:
    pool_fraction: float = 0.8
    k_min: int = 20
    k_max: int = 60
    k_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.pool_fraction <= 1:
            raise DatasetError(f"pool_fraction must lie in (0, 1], got {self.pool_fraction}")
        if self.k_min > self.k_max:
            raise DatasetError(f"k_min ({self.k_min}) exceeds k_max ({self.k_max})")


def _parse_float(text: str, row: int, col: str) -> float:
    if text.strip().lower() in MISSING_TOKENS:
        raise DatasetError(f"row {row}, column {col!r}: missing value")
    try:
        return float(text)
    except ValueError:
        raise DatasetError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None


def load_csv(path: str | Path, spec: ColumnSpec) -> RawTable:
    """Read a comma-delimited file with a header row.

    Row indices in error messages count data rows from 0 (the header is
    not counted).
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        body = [r for r in reader if r]

    lookup = {h: i for i, h in enumerate(header)}
    for col in (spec.label, *spec.categorical, *spec.exclude):
        if col not in lookup:
            raise DatasetError(f"{path}: column {col!r} not in header {header}")
    if spec.label in spec.categorical:
        raise DatasetError("the label column must be numeric")

    skip = set(spec.exclude) | {spec.label}
    feature_cols = [h for h in header if h not in skip]
    kinds = [CATEGORICAL if h in spec.categorical else NUMERIC for h in feature_cols]

    rows, labels = [], []
    for i, fields in enumerate(body):
        if len(fields) != len(header):
            raise DatasetError(
                f"{path}: row {i} has {len(fields)} fields, header has {len(header)}"
            )
        labels.append(_parse_float(fields[lookup[spec.label]], i, spec.label))
        row = []
        for col, kind in zip(feature_cols, kinds):
            raw = fields[lookup[col]]
            if kind == NUMERIC:
                row.append(_parse_float(raw, i, col))
            else:
                if raw.strip().lower() in MISSING_TOKENS:
                    raise DatasetError(f"row {i}, column {col!r}: missing value")
                row.append(raw.strip())
        rows.append(row)

    return RawTable(feature_cols, kinds, rows, np.asarray(labels, dtype=float), spec.label)


def _level_sort_key(level: str):
    # numeric-looking codes sort numerically ("2" < "10")
    try:
        return (0, float(level), level)
    except ValueError:
        return (1, 0.0, level)


def one_hot(table: RawTable) -> tuple[np.ndarray, list[str], dict[tuple[str, str], int]]:
    """Expand categorical columns in place, one column per observed level."""
    blocks, names, encoding = [], [], {}
    for j, (col, kind) in enumerate(zip(table.names, table.kinds)):
        values = [row[j] for row in table.rows]
        if kind == NUMERIC:
            blocks.append(np.asarray(values, dtype=float)[:, None])
            names.append(col)
            continue
        levels = sorted(set(values), key=_level_sort_key)
        block = np.zeros((table.n_rows, len(levels)))
        pos = {lv: c for c, lv in enumerate(levels)}
        for i, v in enumerate(values):
            block[i, pos[v]] = 1.0
        for lv in levels:
            encoding[(col, lv)] = len(names)
            names.append(f"{col}={lv}")
        blocks.append(block)
    X = np.hstack(blocks) if blocks else np.empty((table.n_rows, 0))
    return X, names, encoding


def zscore(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise z-score with population sd.

    Returns the normalized non-constant columns, their means and sds, and a
    boolean mask of the columns that were kept.
    """
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=0)
    centered = X - means
    sds = np.sqrt((centered**2).mean(axis=0))
    # relative test so that large-offset constant columns are caught
    scale_ref = np.maximum(np.abs(means), 1.0)
    keep = sds > 1e-12 * scale_ref
    Z = centered[:, keep] / sds[keep]
    return Z, means[keep], sds[keep], keep


def encode_and_normalize(table: RawTable, name: str = "") -> Dataset:
    if table.n_rows < 2:
        raise DatasetError("need at least 2 rows to normalize")
    X, names, encoding = one_hot(table)
    Z, means, sds, keep = zscore(X)
    kept_index = np.cumsum(keep) - 1
    dropped = [n for n, k in zip(names, keep) if not k]
    encoding = {key: int(kept_index[c]) for key, c in encoding.items() if keep[c]}
    return Dataset(
        features=Z,
        labels=table.labels.copy(),
        feature_names=[n for n, k in zip(names, keep) if k],
        encoding_map=encoding,
        dropped=dropped,
        means=means,
        scales=sds,
        name=name,
    )


def load_dataset(
    path: str | Path, spec: ColumnSpec | str | Path, name: str | None = None
) -> Dataset:
    """``load_csv`` followed by ``encode_and_normalize``."""
    if not isinstance(spec, ColumnSpec):
        spec = ColumnSpec.from_json(spec)
    table = load_csv(path, spec)
    return encode_and_normalize(table, name=name if name is not None else Path(path).stem)


def split_pool(
    ds: Dataset | int, spec: PoolSpec, k0: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw the pool uniformly without replacement.

    Both returned index arrays are sorted, so pool position order follows
    dataset row order. ``k0`` defaults to the feature count of ``ds``.
    """
    if isinstance(ds, Dataset):
        n = ds.n_samples
        if k0 is None:
            k0 = ds.n_features
    else:
        n = int(ds)
    size = math.floor(Fraction(str(spec.pool_fraction)) * n)
    if k0 is not None and size < k0 + 1:
        raise DatasetError(f"pool of {size} samples cannot hold K0+1 = {k0 + 1}")
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(n, size=size, replace=False)
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def budget_k(n_total: int, spec: PoolSpec) -> int:
    """Labeling budget K: k_fraction of the dataset size, clamped to [k_min, k_max]."""
    if n_total < 1:
        raise DatasetError("n_total must be positive")
    k = math.floor(Fraction(str(spec.k_fraction)) * n_total + Fraction(1, 2))
    return int(min(max(k, spec.k_min), spec.k_max))


def drowsiness_index(tau, tau0: float = 1.0):
    """Map driving response time (s) to a drowsiness index in [0, 1].

    (1 - e^-t) / (1 + e^-t) is tanh(t / 2), which is the form evaluated
    here to stay finite for very negative t.
    """
    y = np.maximum(0.0, np.tanh((np.asarray(tau, dtype=float) - tau0) / 2.0))
    return float(y) if np.ndim(y) == 0 else y


def synthetic_linear(
    n: int, d: int, noise: float = 0.5, seed: int = 0, name: str = "synthetic"
) -> Dataset:
    """Seeded linear-Gaussian regression data, for tests and CI runs.

    Not one of the benchmark datasets. Features are z-scored like any
    loaded dataset.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    beta = rng.standard_normal(d)
    y = X @ beta + 3.0 + noise * rng.standard_normal(n)
    Z, means, sds, keep = zscore(X)
    return Dataset(
        features=Z,
        labels=y,
        feature_names=[f"x{j}" for j in range(d) if keep[j]],
        means=means,
        scales=sds,
        name=name,
    )


def raw_table_from_arrays(
    columns: Sequence[Sequence], kinds: Sequence[str], labels: Sequence[float],
    names: Sequence[str] | None = None,
) -> RawTable:
    """Build a RawTable from column lists; convenient for in-memory data."""
    names = list(names) if names is not None else [f"c{j}" for j in range(len(columns))]
    rows = [list(r) for r in zip(*columns)] if columns else [[] for _ in labels]
    rows = [
        [float(v) if k == NUMERIC else str(v) for v, k in zip(r, kinds)] for r in rows
    ]
    return RawTable(names, list(kinds), rows, np.asarray(labels, dtype=float), "label")
