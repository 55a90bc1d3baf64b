"""Columnar datasets with a designated binary protected attribute and target."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError, SchemaMismatch, TooFewRows

NUMERIC = "numeric"
BINARY = "binary"
KINDS = (NUMERIC, BINARY)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column store.

    ``columns`` maps name -> 1-D float64 array (binary columns hold 0.0/1.0).
    Column order is the insertion order of ``columns``.
    """

    columns: Mapping[str, np.ndarray]
    kinds: Mapping[str, str]
    pa_column: str
    target_column: str
    _names: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cols = {}
        n = None
        for name, values in self.columns.items():
            arr = np.array(values, dtype=float)
            if arr.ndim != 1:
                raise SchemaMismatch(f"column {name!r} is not one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise SchemaMismatch(f"column {name!r} has {arr.shape[0]} rows, expected {n}")
            if np.isnan(arr).any():
                raise SchemaMismatch(f"column {name!r} contains missing values")
            arr.setflags(write=False)
            cols[name] = arr
        if set(self.kinds) != set(cols):
            raise SchemaMismatch(
                f"kinds cover {sorted(self.kinds)} but columns are {sorted(cols)}"
            )
        for name, kind in self.kinds.items():
            if kind not in KINDS:
                raise SchemaMismatch(f"column {name!r} has unknown kind {kind!r}")
            if kind == BINARY and not np.isin(cols[name], (0.0, 1.0)).all():
                raise SchemaMismatch(f"binary column {name!r} has values outside {{0,1}}")
        for role, name in (("pa", self.pa_column), ("target", self.target_column)):
            if name not in cols:
                raise SchemaMismatch(f"{role} column {name!r} not present")
            if self.kinds[name] != BINARY:
                raise SchemaMismatch(f"{role} column {name!r} must be binary")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "kinds", {k: self.kinds[k] for k in cols})
        object.__setattr__(self, "_names", tuple(cols))

    @property
    def names(self) -> tuple:
        return self._names

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    def __len__(self):
        return self.n_rows

    @property
    def pa(self) -> np.ndarray:
        return self.columns[self.pa_column]

    @property
    def target(self) -> np.ndarray:
        return self.columns[self.target_column]

    @property
    def feature_names(self) -> list:
        return [c for c in self._names if c != self.target_column]

    def features(self, names=None) -> np.ndarray:
        names = self.feature_names if names is None else list(names)
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaMismatch(f"missing feature columns {missing}")
        return np.column_stack([self.columns[n] for n in names])

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return self.replace({k: v[idx] for k, v in self.columns.items()})

    def replace(self, columns: Mapping[str, np.ndarray]) -> "Dataset":
        """Copy with some columns swapped out (same schema)."""
        cols = dict(self.columns)
        for k, v in columns.items():
            if k not in cols:
                raise SchemaMismatch(f"unknown column {k!r}")
            cols[k] = v
        return Dataset(cols, dict(self.kinds), self.pa_column, self.target_column)

    def schema(self) -> dict:
        return {
            "columns": [{"name": n, "kind": self.kinds[n]} for n in self._names],
            "pa_column": self.pa_column,
            "target_column": self.target_column,
        }

    def equals(self, other: "Dataset") -> bool:
        return self.schema() == other.schema() and all(
            np.array_equal(self.columns[n], other.columns[n]) for n in self._names
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.equals(other)

    __hash__ = None


def _fmt(value: float, kind: str) -> str:
    if kind == BINARY:
        return "1" if value else "0"
    return repr(float(value))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".schema.json")


def save_csv(ds: Dataset, path) -> Path:
    """Write ``ds`` to ``path`` plus a ``<path>.schema.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = ds.names
    kinds = [ds.kinds[n] for n in names]
    cols = [ds.columns[n] for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(ds.n_rows):
            writer.writerow([_fmt(c[i], k) for c, k in zip(cols, kinds)])
    sidecar = sidecar_path(path)
    sidecar.write_text(json.dumps(ds.schema(), indent=2) + "\n")
    return sidecar


def _parse(token: str, kind: str, row: int, column: str) -> float:
    token = token.strip()
    if kind == BINARY:
        if token in ("0", "1"):
            return float(token)
        raise ParseError(f"expected 0 or 1, got {token!r}", row=row, column=column)
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", row=row, column=column)
    return value


def load_csv(path, schema=None) -> Dataset:
    """Read a CSV written by :func:`save_csv`.

    ``schema`` is the sidecar dict or a path to it; defaults to the sidecar
    sitting next to ``path``. Row numbers in errors are 1-based data rows.
    """
    path = Path(path)
    if schema is None:
        schema = sidecar_path(path)
    if not isinstance(schema, Mapping):
        schema = json.loads(Path(schema).read_text())
    try:
        names = [c["name"] for c in schema["columns"]]
        kinds = {c["name"]: c["kind"] for c in schema["columns"]}
        pa, target = schema["pa_column"], schema["target_column"]
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed schema sidecar: {exc}") from None

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0) from None
        if [h.strip() for h in header] != names:
            raise SchemaMismatch(f"header {header} does not match schema columns {names}")
        values = [[] for _ in names]
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(names):
                raise ParseError(f"expected {len(names)} fields, got {len(row)}", row=r)
            for j, (tok, name) in enumerate(zip(row, names)):
                values[j].append(_parse(tok, kinds[name], r, name))
    return Dataset(
        {n: np.asarray(v, dtype=float) for n, v in zip(names, values)}, kinds, pa, target
    )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def split_indices(n: int, spec: SplitSpec):
    if n < 10:
        raise TooFewRows(f"need at least 10 rows to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(spec.train_fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(ds: Dataset, spec: SplitSpec):
    train_idx, test_idx = split_indices(ds.n_rows, spec)
    return ds.take(train_idx), ds.take(test_idx)


def group_masks(pa: np.ndarray, protected=1.0):
    """Boolean masks for the protected group ``a`` and the reference group ``a'``."""
    pa = np.asarray(pa)
    mask_a = pa == protected
    return mask_a, ~mask_a
