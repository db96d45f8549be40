"""Dataset container, CSV ingestion and instrument construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
import yaml

from drml_iv.errors import InputError

MISSING_POLICIES = ("reject", "drop_rows")


@dataclass(frozen=True)
class LoadReport:
    rows_read: int
    rows_dropped: int = 0


@dataclass(frozen=True, eq=False)
class IvDataset:
    """Observed data units (Y, A, Z, X).

    Arrays are copied to float64 (``y``, ``x``) or int8 (``a``, ``z``) and
    frozen, so a dataset can be shared between threads without copying.

    Attributes
    ----------
    y : ndarray, shape (n,)
        Outcome. May be 0/1 coded.
    a : ndarray, shape (n,)
        Treatment received, values in {0, 1}.
    z : ndarray, shape (n,)
        Binary instrument.
    x : ndarray, shape (n, p)
        Dense covariate matrix (categoricals already one-hot encoded).
    column_names : tuple of str
        Labels of the ``p`` covariate columns.
    categorical_map : dict
        Original categorical column -> indices of its one-hot block in ``x``.
    """

    y: np.ndarray
    a: np.ndarray
    z: np.ndarray
    x: np.ndarray
    column_names: tuple[str, ...] = ()
    categorical_map: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    load_report: LoadReport | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        n = y.shape[0]
        a = _as_binary(self.a, "treatment")
        z = _as_binary(self.z, "instrument")
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1) if x.size else np.empty((n, 0))
        if a.shape[0] != n or z.shape[0] != n or x.shape[0] != n:
            raise InputError(
                f"length mismatch: y={n}, a={a.shape[0]}, z={z.shape[0]}, x={x.shape[0]}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InputError("dataset contains missing or non-finite values")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise InputError(f"{len(names)} column names for {x.shape[1]} covariates")
        for arr in (y, a, z, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(
            self, "categorical_map", {k: tuple(v) for k, v in dict(self.categorical_map).items()}
        )

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def y_is_binary(self) -> bool:
        return bool(np.all((self.y == 0.0) | (self.y == 1.0)))

    def columns(self, names: Sequence[str]) -> np.ndarray:
        """Return covariate columns by name as an (n, len(names)) matrix."""
        idx = self.column_index(names)
        return self.x[:, idx]

    def column_index(self, names: Sequence[str]) -> list[int]:
        idx = []
        for name in names:
            if name not in self.column_names:
                raise InputError(f"unknown covariate column {name!r}")
            idx.append(self.column_names.index(name))
        return idx

    def take(self, rows) -> "IvDataset":
        rows = np.asarray(rows)
        return IvDataset(
            self.y[rows], self.a[rows], self.z[rows], self.x[rows],
            self.column_names, self.categorical_map,
        )


def _as_binary(values, what: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == bool:
        return arr.astype(np.int8).reshape(-1)
    arr = np.asarray(arr, dtype=float).reshape(-1)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise InputError(f"{what} not binary: values must be 0 or 1")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class SchemaConfig:
    """Declarative description of a CSV file holding an IV dataset.

    The YAML form uses the same keys as the fields; ``path`` is resolved
    relative to the YAML file::

        path: patients.csv
        outcome_column: adverse
        treatment_column: surgery
        instrument_column: tto_high
        covariate_columns: [age, sepsis, hospital]
        categorical_columns: [hospital]
        missing_policy: reject        # or drop_rows
    """

    path: Path
    outcome_column: str
    treatment_column: str
    instrument_column: str
    covariate_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    missing_policy: str = "reject"

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        object.__setattr__(self, "categorical_columns", tuple(self.categorical_columns))
        roles = [self.outcome_column, self.treatment_column, self.instrument_column]
        if len(set(roles)) != 3:
            raise InputError("outcome, treatment and instrument columns must be distinct")
        clash = set(roles) & set(self.covariate_columns)
        if clash:
            raise InputError(f"columns listed both as role and covariate: {sorted(clash)}")
        extra = set(self.categorical_columns) - set(self.covariate_columns)
        if extra:
            raise InputError(f"categorical columns not among covariates: {sorted(extra)}")
        if self.missing_policy not in MISSING_POLICIES:
            raise InputError(f"missing_policy must be one of {MISSING_POLICIES}")

    @classmethod
    def from_mapping(cls, mapping: Mapping, base_dir: Path | str | None = None) -> "SchemaConfig":
        known = {
            "path", "outcome_column", "treatment_column", "instrument_column",
            "covariate_columns", "categorical_columns", "missing_policy",
        }
        unknown = set(mapping) - known
        if unknown:
            raise InputError(f"unknown schema keys: {sorted(unknown)}")
        missing = {"path", "outcome_column", "treatment_column", "instrument_column"} - set(mapping)
        if missing:
            raise InputError(f"schema is missing keys: {sorted(missing)}")
        kwargs = dict(mapping)
        path = Path(kwargs.pop("path"))
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return cls(path=path, **kwargs)

    @classmethod
    def from_file(cls, path: Path | str) -> "SchemaConfig":
        path = Path(path)
        if not path.exists():
            raise InputError(f"file not found: {path}")
        with open(path) as fh:
            mapping = yaml.safe_load(fh) or {}
        return cls.from_mapping(mapping, base_dir=path.parent)


def load_dataset(config: SchemaConfig) -> IvDataset:
    """Read, validate and encode the CSV described by ``config``.

    Categorical covariates are one-hot encoded with the first (sorted) level
    dropped. Rows with missing fields raise unless ``missing_policy`` is
    ``"drop_rows"``, in which case they are removed and counted in the
    attached :class:`LoadReport`.
    """
    if not config.path.exists():
        raise InputError(f"file not found: {config.path}")
    frame = pd.read_csv(config.path, comment=None, skipinitialspace=True)
    used = [config.outcome_column, config.treatment_column, config.instrument_column,
            *config.covariate_columns]
    absent = [c for c in used if c not in frame.columns]
    if absent:
        raise InputError(f"missing column(s) in {config.path.name}: {absent}")
    frame = frame[used]
    rows_read = len(frame)
    incomplete = frame.isna().any(axis=1)
    if incomplete.any():
        if config.missing_policy == "reject":
            first = int(np.flatnonzero(incomplete.to_numpy())[0])
            raise InputError(f"missing values in {int(incomplete.sum())} row(s), first at data row {first + 1}")
        frame = frame.loc[~incomplete]
    if len(frame) == 0:
        raise InputError("empty dataset")

    def numeric(col):
        try:
            return pd.to_numeric(frame[col]).to_numpy(dtype=float)
        except (ValueError, TypeError) as exc:
            raise InputError(f"column {col!r} is not numeric") from exc

    y = numeric(config.outcome_column)
    a = numeric(config.treatment_column)
    z = numeric(config.instrument_column)
    if not np.all(np.isin(a, (0.0, 1.0))):
        raise InputError("treatment not binary")
    if not np.all(np.isin(z, (0.0, 1.0))):
        raise InputError("instrument not binary")

    blocks, names, cat_map = [], [], {}
    for col in config.covariate_columns:
        if col in config.categorical_columns:
            levels = sorted(frame[col].astype(str).unique())
            values = frame[col].astype(str).to_numpy()
            start = len(names)
            for level in levels[1:]:
                blocks.append((values == level).astype(float))
                names.append(f"{col}={level}")
            cat_map[col] = tuple(range(start, len(names)))
        else:
            blocks.append(numeric(col))
            names.append(col)
    x = np.column_stack(blocks) if blocks else np.empty((len(frame), 0))
    return IvDataset(
        y=y, a=a, z=z, x=x, column_names=tuple(names), categorical_map=cat_map,
        load_report=LoadReport(rows_read=rows_read, rows_dropped=rows_read - len(frame)),
    )


def dichotomize_instrument(raw) -> np.ndarray:
    """Code 1 for values strictly above the sample median, else 0.

    For even ``n`` the median is the midpoint of the two central order
    statistics; ties at the median map to 0.
    """
    raw = np.asarray(raw, dtype=float).reshape(-1)
    if raw.size == 0 or np.all(raw == raw[0]):
        raise InputError("constant instrument: no variation to dichotomize")
    return (raw > np.median(raw)).astype(np.int8)


def compute_preference_instrument(provider_id, operated, n_splits: int = 5, seed: int = 0):
    """Provider preference (tendency to operate) measured on a held-out subset.

    Each provider's patients are shuffled and split into ``n_splits`` subsets.
    The first subset under the shuffle is the measurement subset: its
    operating proportion becomes the instrument value for the provider's
    remaining patients. Patients inside the measurement subset get ``nan``
    and ``usable_mask == 0``.

    Returns
    -------
    tto : ndarray of float
    usable_mask : ndarray of int8
    """
    provider_id = np.asarray(provider_id).reshape(-1)
    operated = _as_binary(operated, "operated")
    if operated.shape[0] != provider_id.shape[0]:
        raise InputError("provider_id and operated lengths differ")
    if n_splits < 2:
        raise InputError("n_splits must be at least 2")
    rng = np.random.default_rng(seed)
    tto = np.full(provider_id.shape[0], np.nan)
    usable = np.zeros(provider_id.shape[0], dtype=np.int8)
    for pid in np.unique(provider_id):
        members = np.flatnonzero(provider_id == pid)
        shuffled = rng.permutation(members)
        subsets = np.array_split(shuffled, n_splits)
        measured = subsets[0]
        rest = np.concatenate(subsets[1:])
        if measured.size == 0 or rest.size == 0:
            continue
        tto[rest] = operated[measured].mean()
        usable[rest] = 1
    return tto, usable
