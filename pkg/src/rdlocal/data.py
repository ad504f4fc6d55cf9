"""Panel ingestion, running-variable construction and windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from rdlocal.errors import EmptySideError, ParseError, SchemaError, ValidationError

#: logical field -> CSV column name
DEFAULT_SCHEMA: dict[str, str] = {
    "unit_id": "unit_id",
    "year": "year",
    "gini": "gini",
    "male_income": "male_income",
    "female_income": "female_income",
    "pbf": "pbf",
}

OUTCOME_FIELDS = ("gini", "male_income", "female_income")
COVARIATE_FIELDS = ("pbf",)


@dataclass(frozen=True)
class PanelRecord:
    unit_id: str
    year: int
    outcome_values: Mapping[str, float] = field(default_factory=dict)
    covariate_values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        gini = self.outcome_values.get("gini")
        if gini is not None and not 0.0 <= gini <= 1.0:
            raise ValidationError(f"{self.unit_id}/{self.year}: gini {gini} outside [0, 1]")
        for name, value in self.covariate_values.items():
            if not math.isfinite(value) or value < 0:
                raise ValidationError(
                    f"{self.unit_id}/{self.year}: covariate {name}={value} must be finite and >= 0"
                )

    def value(self, name: str) -> float:
        if name in self.outcome_values:
            return self.outcome_values[name]
        if name in self.covariate_values:
            return self.covariate_values[name]
        raise KeyError(name)

    def has(self, name: str) -> bool:
        return name in self.outcome_values or name in self.covariate_values


@dataclass(frozen=True)
class Observation:
    unit_id: str
    running: float
    outcome: float
    covariates: tuple[float, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.running):
            raise ValidationError(f"{self.unit_id}: running variable is not finite")


@dataclass(frozen=True)
class Window:
    """Closed interval ``[left, right]`` around the cutoff."""

    left: float
    right: float

    def __post_init__(self):
        if not self.left <= self.right:
            raise ValidationError(f"window [{self.left}, {self.right}] has left > right")

    @classmethod
    def symmetric(cls, half_width: float, cutoff: float = 0.0) -> "Window":
        return cls(cutoff - half_width, cutoff + half_width)

    @property
    def half_width(self) -> float:
        return (self.right - self.left) / 2.0

    def check(self, cutoff: float) -> None:
        if not self.left <= cutoff <= self.right:
            raise ValidationError(
                f"window [{self.left}, {self.right}] does not contain the cutoff {cutoff}"
            )

    def label(self) -> str:
        return f"[{self.left:g}, {self.right:g}]"


@dataclass(frozen=True)
class Dataset:
    observations: tuple[Observation, ...]
    cutoff: float = 0.0
    outcome_name: str = ""
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        k = len(self.covariate_names)
        for obs in self.observations:
            if len(obs.covariates) != k:
                raise ValidationError(
                    f"observation {obs.unit_id}@{obs.running} has {len(obs.covariates)} "
                    f"covariates, expected {k}"
                )

    def __len__(self) -> int:
        return len(self.observations)

    def with_outcome(self, outcome_name: str, values: Sequence[float]) -> "Dataset":
        obs = tuple(
            Observation(o.unit_id, o.running, float(v), o.covariates)
            for o, v in zip(self.observations, values, strict=True)
        )
        return Dataset(obs, self.cutoff, outcome_name, self.covariate_names)


def load_panel_csv(path, schema: Mapping[str, str] | None = None,
                   covariates: Sequence[str] = COVARIATE_FIELDS) -> list[PanelRecord]:
    """Read a unit-year panel from CSV.

    ``schema`` maps logical field names to CSV column names. Logical fields
    named in ``covariates`` are stored as covariates, every other field except
    ``unit_id``/``year`` as an outcome. No imputation is done: an empty or
    non-numeric cell is a :class:`ParseError`.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    covariate_set = set(covariates)
    for required in ("unit_id", "year"):
        if required not in schema:
            raise SchemaError(f"schema has no mapping for {required!r}", column=required)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        index = {}
        for logical, column in schema.items():
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r}", column=column)
            index[logical] = header.index(column)

        records: list[PanelRecord] = []
        seen: dict[tuple[str, int], int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}", row=lineno
                )
            unit = row[index["unit_id"]].strip()
            year_cell = row[index["year"]].strip()
            try:
                year = int(year_cell)
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: column {schema['year']!r}: {year_cell!r} is not an integer year",
                    row=lineno,
                    column=schema["year"],
                ) from None
            outcome_vals, covariate_vals = {}, {}
            for logical, col in index.items():
                if logical in ("unit_id", "year"):
                    continue
                cell = row[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    value = math.nan
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path}:{lineno}: column {schema[logical]!r}: {cell!r} is not a finite number",
                        row=lineno,
                        column=schema[logical],
                    )
                (covariate_vals if logical in covariate_set else outcome_vals)[logical] = value
            key = (unit, year)
            if key in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate ({unit}, {year}), first seen on line {seen[key]}"
                )
            seen[key] = lineno
            try:
                records.append(PanelRecord(unit, year, outcome_vals, covariate_vals))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return records


def recenter(
    records: Sequence[PanelRecord],
    cutoff_year: int,
    outcome_name: str,
    covariate_names: Sequence[str] = (),
) -> Dataset:
    """Build a dataset whose running variable is ``year - cutoff_year``."""
    observations = []
    for rec in records:
        for name in (outcome_name, *covariate_names):
            if not rec.has(name):
                raise ValidationError(f"record ({rec.unit_id}, {rec.year}) has no field {name!r}")
        observations.append(
            Observation(
                unit_id=rec.unit_id,
                running=float(rec.year - cutoff_year),
                outcome=rec.value(outcome_name),
                covariates=tuple(rec.value(c) for c in covariate_names),
            )
        )
    return Dataset(tuple(observations), 0.0, outcome_name, tuple(covariate_names))


def split_window(dataset: Dataset, window: Window) -> tuple[list[Observation], list[Observation]]:
    """Like :func:`subset_window` but never raises on an empty side."""
    window.check(dataset.cutoff)
    c = dataset.cutoff
    control = [o for o in dataset.observations if window.left <= o.running < c]
    treated = [o for o in dataset.observations if c <= o.running <= window.right]
    return control, treated


def subset_window(dataset: Dataset, window: Window) -> tuple[list[Observation], list[Observation]]:
    """Return ``(control, treated)`` observations inside ``window``.

    The cutoff itself belongs to the treated side.
    """
    control, treated = split_window(dataset, window)
    if not control or not treated:
        raise EmptySideError(
            f"window {window.label()} leaves {len(control)} control and "
            f"{len(treated)} treated observations"
        )
    return control, treated


def write_panel_csv(path, records: Sequence[PanelRecord], schema: Mapping[str, str] | None = None,
                    precision: Mapping[str, int] | None = None) -> None:
    """Serialize records with fixed per-field decimal precision (default 6)."""
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    precision = dict(precision or {})
    fields = list(schema)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([schema[f] for f in fields])
        for rec in records:
            row = []
            for f in fields:
                if f == "unit_id":
                    row.append(rec.unit_id)
                elif f == "year":
                    row.append(str(rec.year))
                else:
                    row.append(f"{rec.value(f):.{precision.get(f, 6)}f}")
            writer.writerow(row)
