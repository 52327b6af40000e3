"""Typed tables of mixed discrete/continuous multi-dimensional classification data.

CSV columns are tagged in the header: ``c:`` continuous feature, ``d:`` discrete
feature, ``y:`` class variable. Discrete and class states are dictionary-encoded
in lexicographic order of the raw strings observed in the training file.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from gbnc.errors import (
    BadCell,
    DuplicateColumn,
    EmptyDataset,
    MissingHeaderTag,
    SchemaMismatch,
    TooFewRows,
    UnknownState,
    UnknownVariable,
)

TAGS = {"c": "continuous", "d": "discrete", "y": "class"}


@dataclass(frozen=True)
class Variable:
    """A categorical variable with its ordered state labels."""

    name: str
    states: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise UnknownState(f"state {label!r} not in dictionary of {self.name!r}") from None


@dataclass(frozen=True)
class FeatureSchema:
    continuous: tuple[str, ...]
    discrete: tuple[Variable, ...]
    classes: tuple[Variable, ...]

    def __post_init__(self) -> None:
        names = list(self.continuous) + [v.name for v in self.discrete] + [v.name for v in self.classes]
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"variable names must be unique, got {names}")
        if not self.classes:
            raise SchemaMismatch("at least one class variable is required")
        for v in self.discrete + self.classes:
            if v.cardinality < 2:
                raise SchemaMismatch(f"variable {v.name!r} has cardinality {v.cardinality} < 2")

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.classes)

    @property
    def discrete_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.discrete)

    @property
    def class_cards(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.classes)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def variable(self, name: str) -> Variable:
        """Look up a discrete feature or class variable by name."""
        for v in self.discrete + self.classes:
            if v.name == name:
                return v
        raise UnknownVariable(f"unknown discrete/class variable {name!r}")

    def is_class(self, name: str) -> bool:
        return name in self.class_names

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise UnknownVariable(f"unknown class variable {name!r}") from None


@dataclass(frozen=True)
class Instance:
    x_c: np.ndarray
    x_d: np.ndarray
    y: np.ndarray | None = None


@dataclass(frozen=True, order=True)
class Configuration:
    """A joint assignment of state indices to a tuple of discrete variables."""

    variables: tuple[str, ...]
    states: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.variables) != len(self.states):
            raise ValueError("variables and states differ in length")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError(f"duplicate variables in configuration {self.variables}")

    @classmethod
    def empty(cls) -> "Configuration":
        return cls((), ())

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.variables, self.states))

    def validate(self, schema: FeatureSchema) -> None:
        for name, s in zip(self.variables, self.states):
            card = schema.variable(name).cardinality
            if not 0 <= s < card:
                raise UnknownState(f"state index {s} out of range for {name!r} (cardinality {card})")


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Immutable dataset: continuous matrix, discrete matrix, class matrix."""

    schema: FeatureSchema
    x_c: np.ndarray
    x_d: np.ndarray
    y: np.ndarray | None
    source: str = "<memory>"

    def __post_init__(self) -> None:
        n = self.x_c.shape[0]
        xc = np.array(self.x_c, dtype=np.float64, copy=True).reshape(n, len(self.schema.continuous))
        xd = np.array(self.x_d, dtype=np.int64, copy=True).reshape(n, len(self.schema.discrete))
        if not np.all(np.isfinite(xc)):
            raise BadCell(int(np.argwhere(~np.isfinite(xc))[0, 0]), "<continuous>", "nan/inf", "non-finite value")
        _check_range(xd, [v.cardinality for v in self.schema.discrete])
        xc.setflags(write=False)
        xd.setflags(write=False)
        object.__setattr__(self, "x_c", xc)
        object.__setattr__(self, "x_d", xd)
        if self.y is not None:
            y = np.array(self.y, dtype=np.int64, copy=True).reshape(n, self.schema.n_classes)
            _check_range(y, list(self.schema.class_cards))
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n_rows(self) -> int:
        return self.x_c.shape[0]

    @property
    def has_classes(self) -> bool:
        return self.y is not None

    def __len__(self) -> int:
        return self.n_rows

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DatasetBundle):
            return NotImplemented
        if self.schema != other.schema or self.has_classes != other.has_classes:
            return False
        same_y = self.y is None or np.array_equal(self.y, other.y)
        return same_y and np.array_equal(self.x_c, other.x_c) and np.array_equal(self.x_d, other.x_d)

    __hash__ = None  # type: ignore[assignment]

    def row(self, i: int) -> Instance:
        return Instance(self.x_c[i], self.x_d[i], None if self.y is None else self.y[i])

    def rows(self) -> Iterable[Instance]:
        for i in range(self.n_rows):
            yield self.row(i)

    def column(self, name: str) -> np.ndarray:
        """State-index column of a discrete feature or class variable."""
        if name in self.schema.discrete_names:
            return self.x_d[:, self.schema.discrete_names.index(name)]
        if name in self.schema.class_names:
            if self.y is None:
                raise SchemaMismatch(f"bundle has no class columns; cannot read {name!r}")
            return self.y[:, self.schema.class_names.index(name)]
        raise UnknownVariable(f"unknown discrete/class variable {name!r}")

    def columns(self, names: Sequence[str]) -> np.ndarray:
        if not names:
            return np.zeros((self.n_rows, 0), dtype=np.int64)
        return np.stack([self.column(n) for n in names], axis=1)

    def subset(self, rows: Sequence[int] | np.ndarray) -> "DatasetBundle":
        idx = np.asarray(rows, dtype=np.int64)
        return DatasetBundle(
            self.schema,
            self.x_c[idx],
            self.x_d[idx],
            None if self.y is None else self.y[idx],
            source=self.source,
        )

    def without_classes(self) -> "DatasetBundle":
        return DatasetBundle(self.schema, self.x_c, self.x_d, None, source=self.source)


def _check_range(mat: np.ndarray, cards: Sequence[int]) -> None:
    for j, card in enumerate(cards):
        col = mat[:, j]
        if col.size and (col.min() < 0 or col.max() >= card):
            bad = int(np.argwhere((col < 0) | (col >= card))[0, 0])
            raise UnknownState(f"state index {col[bad]} out of range (cardinality {card}) at row {bad}")


# ---------------------------------------------------------------------------
# CSV input/output
# ---------------------------------------------------------------------------


def _parse_header(header: Sequence[str]) -> list[tuple[str, str]]:
    parsed = []
    seen: set[str] = set()
    for cell in header:
        cell = cell.strip()
        tag, sep, name = cell.partition(":")
        if not sep or tag not in TAGS or not name:
            raise MissingHeaderTag(f"column {cell!r} lacks a c:/d:/y: tag")
        if name in seen:
            raise DuplicateColumn(f"column {name!r} appears more than once")
        seen.add(name)
        parsed.append((tag, name))
    return parsed


def load_csv(
    path: str | Path,
    schema: FeatureSchema | None = None,
    require_classes: bool = True,
) -> DatasetBundle:
    """Load a tagged CSV file.

    Args:
        path: File to read.
        schema: Reuse the state dictionaries of an existing (training) schema.
            Values outside those dictionaries raise ``UnknownState``.
        require_classes: When False, class columns may be absent (prediction
            input). Only honoured together with ``schema``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return _read(fh, str(path), schema, require_classes)


def read_csv_text(text: str, schema: FeatureSchema | None = None, require_classes: bool = True) -> DatasetBundle:
    return _read(io.StringIO(text), "<string>", schema, require_classes)


def _read(fh, source: str, schema: FeatureSchema | None, require_classes: bool) -> DatasetBundle:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset(f"{source}: no header row") from None
    columns = _parse_header(header)
    records = [r for r in reader if r]
    if not records:
        raise EmptyDataset(f"{source}: zero data rows")
    for i, r in enumerate(records):
        if len(r) != len(columns):
            raise BadCell(i + 1, "<row>", ",".join(r), f"expected {len(columns)} cells, got {len(r)} in")

    def raw(j: int) -> list[str]:
        return [r[j].strip() for r in records]

    idx = {name: j for j, (_, name) in enumerate(columns)}
    if schema is None:
        cont = tuple(n for t, n in columns if t == "c")
        disc = tuple(Variable(n, _dictionary(raw(idx[n]), n)) for t, n in columns if t == "d")
        cls = tuple(Variable(n, _dictionary(raw(idx[n]), n)) for t, n in columns if t == "y")
        schema = FeatureSchema(cont, disc, cls)
        has_classes = True
    else:
        tags = {n: t for t, n in columns}
        expected = {n: "c" for n in schema.continuous}
        expected.update({v.name: "d" for v in schema.discrete})
        class_tags = {v.name: "y" for v in schema.classes}
        present_classes = [n for n in class_tags if n in tags]
        has_classes = bool(present_classes)
        if has_classes or require_classes:
            expected.update(class_tags)
        if tags != expected:
            raise SchemaMismatch(f"{source}: columns {sorted(tags.items())} do not match model schema {sorted(expected.items())}")

    n = len(records)
    x_c = np.empty((n, len(schema.continuous)), dtype=np.float64)
    for j, name in enumerate(schema.continuous):
        for i, cell in enumerate(raw(idx[name])):
            x_c[i, j] = _parse_real(cell, i + 1, name)
    x_d = _encode(schema.discrete, raw, idx)
    y = _encode(schema.classes, raw, idx) if has_classes else None
    return DatasetBundle(schema, x_c, x_d, y, source=source)


def _dictionary(values: list[str], name: str) -> tuple[str, ...]:
    for i, v in enumerate(values):
        if v == "":
            raise BadCell(i + 1, name, v, "missing value")
    states = tuple(sorted(set(values)))
    if len(states) < 2:
        # a constant column still needs a second state to form a valid variable
        raise SchemaMismatch(f"column {name!r} has a single observed state {states}; cardinality must be >= 2")
    return states


def _encode(variables: Sequence[Variable], raw, idx) -> np.ndarray:
    cols = []
    for v in variables:
        lookup = {s: k for k, s in enumerate(v.states)}
        col = []
        for i, cell in enumerate(raw(idx[v.name])):
            if cell == "":
                raise BadCell(i + 1, v.name, cell, "missing value")
            if cell not in lookup:
                raise UnknownState(f"state {cell!r} of {v.name!r} at data row {i + 1} not in training dictionary")
            col.append(lookup[cell])
        cols.append(col)
    n = len(raw(0)) if idx else 0
    if not cols:
        return np.zeros((n, 0), dtype=np.int64)
    return np.array(cols, dtype=np.int64).T


def _parse_real(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise BadCell(row, column, cell) from None
    if not math.isfinite(value):
        raise BadCell(row, column, cell, "missing or non-finite value")
    return value


def to_csv_text(bundle: DatasetBundle) -> str:
    """Serialize a bundle; identical bundles yield identical bytes."""
    s = bundle.schema
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"c:{n}" for n in s.continuous] + [f"d:{v.name}" for v in s.discrete]
    if bundle.has_classes:
        header += [f"y:{v.name}" for v in s.classes]
    writer.writerow(header)
    for i in range(bundle.n_rows):
        row = [repr(float(x)) for x in bundle.x_c[i]]
        row += [v.states[k] for v, k in zip(s.discrete, bundle.x_d[i])]
        if bundle.has_classes:
            row += [v.states[k] for v, k in zip(s.classes, bundle.y[i])]
        writer.writerow(row)
    return buf.getvalue()


def save_csv(bundle: DatasetBundle, path: str | Path) -> None:
    Path(path).write_text(to_csv_text(bundle), encoding="utf-8")


# ---------------------------------------------------------------------------
# Partitions, folds, encodings
# ---------------------------------------------------------------------------


def partition_by_configuration(
    bundle: DatasetBundle,
    variables: Sequence[str],
    rows: np.ndarray | None = None,
) -> dict[Configuration, np.ndarray]:
    """Group row indices by the observed joint state of ``variables``.

    Only configurations with at least one row appear as keys; keys are in
    lexicographic order of their state tuples.
    """
    variables = tuple(variables)
    for name in variables:
        bundle.schema.variable(name)
    if rows is None:
        rows = np.arange(bundle.n_rows)
    rows = np.asarray(rows, dtype=np.int64)
    if not variables:
        return {Configuration.empty(): rows} if rows.size else {}
    if rows.size == 0:
        return {}
    states = bundle.columns(variables)[rows]
    keys, inverse = np.unique(states, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    return {
        Configuration(variables, tuple(int(s) for s in key)): rows[order[bounds[k] : bounds[k + 1]]]
        for k, key in enumerate(keys)
    }


@dataclass(frozen=True)
class FoldPlan:
    fold_count: int
    assignments: np.ndarray
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.fold_count).tolist()


def make_folds(bundle: DatasetBundle | int, fold_count: int, seed: int) -> FoldPlan:
    """Shuffle row indices with ``seed`` and deal them round-robin into folds."""
    n = bundle if isinstance(bundle, int) else bundle.n_rows
    if fold_count < 2 or fold_count > n:
        raise TooFewRows(f"need 2 <= fold_count <= N, got fold_count={fold_count}, N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % fold_count
    assignments.setflags(write=False)
    return FoldPlan(fold_count, assignments, seed)


def one_hot_names(schema: FeatureSchema) -> tuple[str, ...]:
    names = list(schema.continuous)
    for v in schema.discrete:
        names += [f"{v.name}={s}" for s in v.states]
    return tuple(names)


def one_hot_matrix(bundle: DatasetBundle) -> np.ndarray:
    blocks = [bundle.x_c]
    for j, v in enumerate(bundle.schema.discrete):
        blocks.append(np.eye(v.cardinality)[bundle.x_d[:, j]])
    return np.hstack(blocks) if blocks else np.zeros((bundle.n_rows, 0))


def one_hot_view(bundle: DatasetBundle) -> DatasetBundle:
    """Replace each discrete feature by indicator columns; classes unchanged."""
    if not bundle.schema.discrete:
        return bundle
    schema = FeatureSchema(one_hot_names(bundle.schema), (), bundle.schema.classes)
    return DatasetBundle(
        schema,
        one_hot_matrix(bundle),
        np.zeros((bundle.n_rows, 0), dtype=np.int64),
        bundle.y,
        source=bundle.source,
    )


def make_bundle(
    x_c: np.ndarray | None,
    x_d: np.ndarray | None,
    y: np.ndarray | None,
    continuous: Sequence[str] | None = None,
    discrete: Mapping[str, int] | Sequence[tuple[str, int]] | None = None,
    classes: Mapping[str, int] | Sequence[tuple[str, int]] | None = None,
) -> DatasetBundle:
    """Build a bundle from integer-coded arrays; state labels are ``"0".."M-1"``.

    Labels are zero-padded so lexicographic order matches index order.
    """

    def variables(spec) -> tuple[Variable, ...]:
        items = spec.items() if isinstance(spec, Mapping) else (spec or [])
        out = []
        for name, card in items:
            width = len(str(card - 1))
            out.append(Variable(name, tuple(str(k).zfill(width) for k in range(card))))
        return tuple(out)

    n = next(a.shape[0] for a in (x_c, x_d, y) if a is not None)
    x_c = np.zeros((n, 0)) if x_c is None else np.asarray(x_c, dtype=np.float64).reshape(n, -1)
    x_d = np.zeros((n, 0), dtype=np.int64) if x_d is None else np.asarray(x_d).reshape(n, -1)
    if continuous is None:
        continuous = [f"x{j}" for j in range(x_c.shape[1])]
    schema = FeatureSchema(tuple(continuous), variables(discrete), variables(classes))
    return DatasetBundle(schema, x_c, x_d, y)
