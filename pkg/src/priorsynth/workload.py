"""Marginal queries held implicitly as attribute subsets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .domain import DensityDistribution, Histogram, Schema
from .errors import ConfigError

MAX_MATERIALIZED_CELLS = 10**4


@dataclass(frozen=True)
class MarginalQuery:
    """k-way marginal over the attributes ``attrs`` (sorted schema indices).

    As a 0/1 matrix it has one row per marginal cell, and every domain cell is
    covered by exactly one row.
    """

    attrs: tuple[int, ...]

    def __post_init__(self):
        attrs = tuple(sorted(int(a) for a in self.attrs))
        if not attrs:
            raise ConfigError("a marginal query needs at least one attribute")
        if len(set(attrs)) != len(attrs) or attrs[0] < 0:
            raise ConfigError(f"invalid attribute set {attrs}")
        object.__setattr__(self, "attrs", attrs)

    @classmethod
    def from_names(cls, schema: Schema, names: Sequence[str]) -> "MarginalQuery":
        return cls(tuple(schema.index_of(n) for n in names))

    def names(self, schema: Schema) -> list[str]:
        return [schema.names[a] for a in self.attrs]

    def check(self, schema: Schema) -> None:
        if self.attrs[-1] >= len(schema):
            raise ConfigError(f"query {self.attrs} references attributes outside the schema")

    def size(self, schema: Schema) -> int:
        """Number of marginal cells (rows of the implicit matrix)."""
        self.check(schema)
        out = 1
        for a in self.attrs:
            out *= schema.sizes[a]
        return out

    def block_size(self, schema: Schema) -> int:
        """Number of domain cells covered by each row."""
        return schema.size // self.size(schema)

    def rows_of(self, schema: Schema, cells: np.ndarray) -> np.ndarray:
        """Marginal row index (mixed-radix over ``attrs``) of each domain cell."""
        self.check(schema)
        digits = schema.digits(cells, self.attrs)
        out = np.zeros(len(digits), dtype=np.int64)
        for k, a in enumerate(self.attrs):
            out = out * schema.sizes[a] + digits[:, k]
        return out

    def block_cells(self, schema: Schema, row: int) -> np.ndarray:
        """All domain cells covered by marginal row ``row``, sorted."""
        self.check(schema)
        free = [a for a in range(len(schema)) if a not in self.attrs]
        base = 0
        for a in reversed(self.attrs):
            row, d = divmod(row, schema.sizes[a])
            base += d * schema.strides[a]
        cells = np.array([base], dtype=np.uint64)
        for a in free:
            steps = np.arange(schema.sizes[a], dtype=np.uint64) * np.uint64(schema.strides[a])
            cells = (cells[:, None] + steps[None, :]).ravel()
        return np.sort(cells)


@dataclass(frozen=True)
class Workload:
    queries: tuple[MarginalQuery, ...]

    def __post_init__(self):
        queries = tuple(q if isinstance(q, MarginalQuery) else MarginalQuery(tuple(q)) for q in self.queries)
        if not queries:
            raise ConfigError("a workload needs at least one query")
        seen = set()
        for q in queries:
            if q.attrs in seen:
                raise ConfigError(f"duplicate marginal {q.attrs} in workload")
            seen.add(q.attrs)
        object.__setattr__(self, "queries", queries)

    @classmethod
    def from_names(cls, schema: Schema, names: Sequence[Sequence[str]]) -> "Workload":
        return cls(tuple(MarginalQuery.from_names(schema, ns) for ns in names))

    def to_names(self, schema: Schema) -> list[list[str]]:
        return [q.names(schema) for q in self.queries]

    def check(self, schema: Schema) -> None:
        for q in self.queries:
            q.check(schema)

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def __getitem__(self, i) -> MarginalQuery:
        return self.queries[i]


@dataclass(frozen=True)
class MarginalVector:
    query: MarginalQuery
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if not np.isfinite(values).all():
            raise ValueError("marginal vector entries must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


Measurable = Union[DensityDistribution, Histogram]


def _weights(data: Measurable) -> np.ndarray:
    if isinstance(data, Histogram):
        return data.counts.astype(np.float64)
    return data.mass


def evaluate_marginal(data: Measurable, query: MarginalQuery) -> MarginalVector:
    """Answer a marginal query on a histogram (counts) or distribution (probabilities)."""
    schema = data.schema
    size = query.size(schema)
    rows = query.rows_of(schema, data.cells)
    return MarginalVector(query, np.bincount(rows, weights=_weights(data), minlength=size))


def workload_sensitivity(workload: Workload) -> int:
    """Maximum column sum of the stacked 0/1 workload matrix.

    Each full marginal covers every cell with exactly one row, so every query
    contributes one to every column.
    """
    return len(workload.queries)


@dataclass(frozen=True)
class PartialWorkloadReport:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_partial_workload(queries: Sequence[MarginalQuery]) -> PartialWorkloadReport:
    """Check that a set of queries has disjoint row supports (max column sum 1)."""
    queries = list(queries)
    if not queries:
        return PartialWorkloadReport(False, "empty partial workload")
    if len(queries) > 1:
        # full marginals each cover every cell, so any two overlap everywhere
        return PartialWorkloadReport(
            False, f"{len(queries)} full marginals cover every cell {len(queries)} times"
        )
    return PartialWorkloadReport(True)


def materialize(schema: Schema, query: MarginalQuery) -> np.ndarray:
    """Dense 0/1 matrix of a query. Test support only; capped at 10^4 cells."""
    if schema.size > MAX_MATERIALIZED_CELLS:
        raise ConfigError(f"refusing to materialise {schema.size} columns")
    rows = query.rows_of(schema, np.arange(schema.size, dtype=np.uint64))
    mat = np.zeros((query.size(schema), schema.size), dtype=np.int64)
    mat[rows, np.arange(schema.size)] = 1
    return mat
