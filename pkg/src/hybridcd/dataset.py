"""Tabular samples with a typed column schema.

A dataset is an M x p float64 matrix plus, per column, a name and a kind:
"continuous" for real-valued mechanisms or "binary" for two-state columns
coded exactly 1.0 / 2.0. CSV is the on-disk format, one header row of column
names; the schema travels separately as JSON.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataValidationError, UsageError

KINDS = ("continuous", "binary")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise DataValidationError(f"column name must be a non-empty string, got {self.name!r}")
        if self.kind not in KINDS:
            raise DataValidationError(
                f"column {self.name!r} has kind {self.kind!r}, expected one of {KINDS}"
            )

    @property
    def is_binary(self) -> bool:
        return self.kind == "binary"


class Dataset:
    """Immutable sample matrix bound to a schema.

    values is float64 with one row per sample and one column per schema entry;
    the array is marked read-only so fitted models cannot mutate shared data.
    """

    def __init__(self, schema: list[ColumnSchema], values: np.ndarray):
        schema = tuple(schema)
        if not schema:
            raise DataValidationError("dataset needs at least one column")
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise DataValidationError("column names must be unique")
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DataValidationError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[1] != len(schema):
            raise DataValidationError(
                f"{values.shape[1]} value columns for {len(schema)} schema columns"
            )
        if values.shape[0] < 1:
            raise DataValidationError("dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            raise DataValidationError("values must be finite (no NaN or inf)")
        for k, col in enumerate(schema):
            if col.is_binary:
                bad = ~np.isin(values[:, k], (1.0, 2.0))
                if bad.any():
                    row = int(np.argmax(bad))
                    raise DataValidationError(
                        f"binary column {col.name!r} holds {values[row, k]!r} "
                        f"at row {row}; only 1 and 2 are valid"
                    )
        values = values.copy()
        values.setflags(write=False)
        self._schema = schema
        self._values = values

    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_rows(self) -> int:
        return self._values.shape[0]

    @property
    def n_cols(self) -> int:
        return self._values.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._schema]

    def column(self, key: int | str) -> np.ndarray:
        """One column as a read-only 1-D view, by index or by name."""
        return self._values[:, self.column_index(key)]

    def column_index(self, key: int | str) -> int:
        if isinstance(key, str):
            for k, col in enumerate(self._schema):
                if col.name == key:
                    return k
            raise UsageError(f"no column named {key!r}")
        k = int(key)
        if not (0 <= k < self.n_cols):
            raise UsageError(f"column index {k} out of range for {self.n_cols} columns")
        return k

    def binary_indices(self) -> list[int]:
        return [k for k, c in enumerate(self._schema) if c.is_binary]

    def continuous_indices(self) -> list[int]:
        return [k for k, c in enumerate(self._schema) if not c.is_binary]


# --- schema JSON -------------------------------------------------------------


def schema_to_json(schema: list[ColumnSchema] | tuple[ColumnSchema, ...]) -> dict:
    return {"columns": [{"name": c.name, "kind": c.kind} for c in schema]}


def schema_from_json(obj: dict) -> list[ColumnSchema]:
    if not isinstance(obj, dict) or not isinstance(obj.get("columns"), list):
        raise DataValidationError('schema JSON must be an object with a "columns" list')
    out = []
    for entry in obj["columns"]:
        if not isinstance(entry, dict) or "name" not in entry or "kind" not in entry:
            raise DataValidationError(f"schema entry {entry!r} needs \"name\" and \"kind\"")
        out.append(ColumnSchema(entry["name"], entry["kind"]))
    if not out:
        raise DataValidationError("schema JSON lists no columns")
    return out


def load_schema(path: str | Path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"schema file {path} is not valid JSON: {exc}") from exc
    return schema_from_json(obj)


def save_schema(schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_json(schema), fh, indent=2)
        fh.write("\n")


# --- CSV ---------------------------------------------------------------------


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Header row of names, then one row per sample; floats at full precision
    so a round trip reproduces the matrix bit for bit.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.names)
        for row in ds.values:
            writer.writerow([f"{v:.17g}" for v in row])


def load_csv(path: str | Path, schema_path: str | Path) -> Dataset:
    """Read a data CSV and its schema JSON together.

    The CSV header must list the schema's column names in schema order.
    """
    schema = load_schema(schema_path)
    with open(path, encoding="utf-8", newline="") as fh:
        return _parse_csv(fh, schema, str(path))


def loads_csv(text: str, schema: list[ColumnSchema]) -> Dataset:
    return _parse_csv(io.StringIO(text), schema, "<string>")


def _parse_csv(fh, schema, origin: str) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataValidationError(f"{origin}: empty CSV") from None
    expected = [c.name for c in schema]
    if header != expected:
        raise DataValidationError(
            f"{origin}: header {header} does not match schema columns {expected} in order"
        )
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataValidationError(
                f"{origin}: line {lineno} has {len(row)} fields, expected {len(header)}"
            )
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise DataValidationError(f"{origin}: line {lineno}: {exc}") from exc
    if not rows:
        raise DataValidationError(f"{origin}: CSV has a header but no data rows")
    return Dataset(list(schema), np.array(rows, dtype=np.float64))
