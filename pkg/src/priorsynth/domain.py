"""Discrete product domains, flat cell encoding, histograms and sparse densities.

A record is a tuple of category labels, one per attribute.  Records map to a
flat cell index in ``[0, N)`` by mixed-radix encoding with the first attribute
as the most significant digit.  Histograms and densities are stored sparsely as
sorted ``uint64`` cell arrays plus a parallel value array; cells that are not
stored have zero count / zero probability.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import CellRangeError, ConfigError, DomainError, EmptyDataError, IngestError

U64_MAX = 2**64 - 1
MASS_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _parse_edge(edge) -> float:
    if edge is None:
        return math.inf
    if isinstance(edge, str):
        return float(edge)  # accepts "inf" / "-inf"
    return float(edge)


@dataclass(frozen=True)
class Attribute:
    """One categorical attribute.

    ``bins`` optionally maps raw numbers onto the labels: label ``i`` covers
    ``bins[i] <= x < bins[i + 1]`` so there must be one more edge than labels.
    """

    name: str
    labels: tuple[str, ...]
    bins: tuple[float, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("attribute names must be nonempty strings")
        labels = tuple(str(lab) for lab in self.labels)
        if not labels:
            raise ConfigError(f"attribute {self.name!r} has an empty domain")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"attribute {self.name!r} has duplicate labels")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_lookup", {lab: i for i, lab in enumerate(labels)})
        if self.bins is not None:
            edges = tuple(_parse_edge(e) for e in self.bins)
            if len(edges) != len(labels) + 1:
                raise ConfigError(
                    f"attribute {self.name!r}: {len(labels)} labels need {len(labels) + 1} bin edges"
                )
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ConfigError(f"attribute {self.name!r}: bin edges must increase")
            object.__setattr__(self, "bins", edges)

    @property
    def size(self) -> int:
        return len(self.labels)

    def code(self, value: Any) -> int:
        """Label index of ``value``; numeric values go through the bin edges."""
        key = value if isinstance(value, str) else str(value)
        idx = self._lookup.get(key)
        if idx is not None:
            return idx
        if self.bins is not None:
            try:
                x = float(value)
            except (TypeError, ValueError):
                x = math.nan
            if self.bins[0] <= x < self.bins[-1]:
                return bisect.bisect_right(self.bins, x) - 1
        raise DomainError(f"{value!r} is not in the domain of attribute {self.name!r}")

    def to_dict(self) -> dict:
        out: dict = {"name": self.name, "labels": list(self.labels)}
        if self.bins is not None:
            out["bins"] = [None if math.isinf(b) and b > 0 else b for b in self.bins]
        return out


class Schema:
    """Ordered attribute list with a mixed-radix cell encoding."""

    def __init__(self, attributes: Sequence[Attribute]):
        attributes = tuple(attributes)
        if not attributes:
            raise ConfigError("a schema needs at least one attribute")
        names = [a.name for a in attributes]
        if len(set(names)) != len(names):
            raise ConfigError("attribute names must be unique")
        self.attributes = attributes
        self.names = tuple(names)
        self.sizes = tuple(a.size for a in attributes)
        size = 1
        for s in self.sizes:
            size *= s
        if size > U64_MAX:
            raise ConfigError(f"domain size {size} does not fit in 64 bits")
        self.size = size
        strides = []
        acc = 1
        for s in reversed(self.sizes):
            strides.append(acc)
            acc *= s
        self.strides = tuple(reversed(strides))
        self._strides_u = np.array(self.strides, dtype=np.uint64)
        self._sizes_u = np.array(self.sizes, dtype=np.uint64)
        self._index = {n: i for i, n in enumerate(names)}

    @classmethod
    def from_dict(cls, spec: Mapping) -> "Schema":
        try:
            attrs = spec["attributes"]
            return cls([Attribute(a["name"], tuple(a["labels"]), a.get("bins")) for a in attrs])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed schema: {exc}") from exc

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], names: Sequence[str] | None = None) -> "Schema":
        """Schema with labels ``"0".."k-1"``; handy for tests and synthetic data."""
        names = names or [f"A{i}" for i in range(len(sizes))]
        return cls([Attribute(n, tuple(str(j) for j in range(k))) for n, k in zip(names, sizes)])

    def to_dict(self) -> dict:
        return {"attributes": [a.to_dict() for a in self.attributes]}

    def __len__(self) -> int:
        return len(self.attributes)

    def __eq__(self, other) -> bool:
        return isinstance(other, Schema) and self.attributes == other.attributes

    def __hash__(self) -> int:
        return hash(self.attributes)

    def __repr__(self) -> str:
        return f"Schema({', '.join(f'{n}[{s}]' for n, s in zip(self.names, self.sizes))})"

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ConfigError(f"unknown attribute {name!r}") from None

    # -- encoding ---------------------------------------------------------
    def codes(self, values: Sequence[Any]) -> tuple[int, ...]:
        if len(values) != len(self.attributes):
            raise DomainError(f"expected {len(self.attributes)} values, got {len(values)}")
        return tuple(a.code(v) for a, v in zip(self.attributes, values))

    def encode_cell(self, values: Sequence[Any]) -> int:
        return sum(c * s for c, s in zip(self.codes(values), self.strides))

    def decode_cell(self, cell: int) -> tuple[str, ...]:
        cell = int(cell)
        if not 0 <= cell < self.size:
            raise CellRangeError(f"cell index {cell} outside [0, {self.size})")
        out = []
        for attr, stride in zip(self.attributes, self.strides):
            digit, cell = divmod(cell, stride)
            out.append(attr.labels[digit])
        return tuple(out)

    def encode_codes(self, codes: np.ndarray) -> np.ndarray:
        """Vectorised encoding of an ``(n, m)`` array of label indices."""
        codes = np.asarray(codes)
        if codes.ndim != 2 or codes.shape[1] != len(self.attributes):
            raise DomainError("codes must have shape (n, m)")
        if codes.size and ((codes < 0).any() or (codes >= np.array(self.sizes)).any()):
            raise DomainError("label index out of range")
        return (codes.astype(np.uint64) * self._strides_u).sum(axis=1, dtype=np.uint64)

    def decode_codes(self, cells: np.ndarray) -> np.ndarray:
        """Vectorised inverse of :meth:`encode_codes`, returns int64 codes."""
        cells = np.asarray(cells, dtype=np.uint64)
        return ((cells[:, None] // self._strides_u) % self._sizes_u).astype(np.int64)

    def digits(self, cells: np.ndarray, attrs: Sequence[int]) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.uint64)
        idx = list(attrs)
        return ((cells[:, None] // self._strides_u[idx]) % self._sizes_u[idx]).astype(np.int64)

    def check_cells(self, cells: np.ndarray) -> None:
        if cells.size and int(cells.max()) >= self.size:
            raise CellRangeError(f"cell index {int(cells.max())} outside [0, {self.size})")


def encode_cell(schema: Schema, values: Sequence[Any]) -> int:
    return schema.encode_cell(values)


def decode_cell(schema: Schema, cell: int) -> tuple[str, ...]:
    return schema.decode_cell(cell)


def _as_cells(cells) -> np.ndarray:
    if isinstance(cells, np.ndarray):
        if cells.size and cells.dtype.kind == "i" and cells.min() < 0:
            raise CellRangeError("negative cell index")
        return cells.astype(np.uint64, copy=False)
    cells = list(cells)
    if any(int(c) < 0 for c in cells):
        raise CellRangeError("negative cell index")
    return np.array([int(c) for c in cells], dtype=np.uint64)


class Histogram:
    """Sparse cell counts. Zero counts are never stored."""

    __slots__ = ("schema", "cells", "counts", "total")

    def __init__(self, schema: Schema, cells, counts):
        cells = _as_cells(cells)
        counts = np.asarray(counts, dtype=np.int64)
        if cells.shape != counts.shape:
            raise ValueError("cells and counts differ in length")
        if counts.size and counts.min() < 0:
            raise ValueError("negative counts")
        schema.check_cells(cells)
        order = np.argsort(cells, kind="stable")
        cells, counts = cells[order], counts[order]
        if cells.size > 1 and (np.diff(cells) == 0).any():
            raise ValueError("duplicate cells")
        keep = counts > 0
        self.schema = schema
        self.cells = _frozen(cells[keep])
        self.counts = _frozen(counts[keep])
        self.total = int(self.counts.sum())

    @classmethod
    def from_cells(cls, schema: Schema, cells) -> "Histogram":
        """Histogram of a multiset of cell indices."""
        cells = _as_cells(cells)
        uniq, counts = np.unique(cells, return_counts=True)
        return cls(schema, uniq, counts)

    @classmethod
    def empty(cls, schema: Schema) -> "Histogram":
        return cls(schema, np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.int64))

    @classmethod
    def from_dict(cls, schema: Schema, counts: Mapping[int, int]) -> "Histogram":
        return cls(schema, list(counts.keys()), list(counts.values()))

    def to_dict(self) -> dict[int, int]:
        return {int(c): int(n) for c, n in zip(self.cells, self.counts)}

    def __len__(self) -> int:
        return int(self.cells.size)

    def __add__(self, other: "Histogram") -> "Histogram":
        if other.schema != self.schema:
            raise ConfigError("cannot add histograms over different schemas")
        cells = np.concatenate([self.cells, other.cells])
        counts = np.concatenate([self.counts, other.counts])
        uniq, inv = np.unique(cells, return_inverse=True)
        return Histogram(self.schema, uniq, np.bincount(inv, weights=counts).astype(np.int64))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Histogram)
            and self.schema == other.schema
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return f"Histogram(support={len(self)}, total={self.total})"


def histogram_from_records(schema: Schema, records: Iterable[Sequence[Any]]) -> Histogram:
    """Count records (tuples of labels or binnable numbers) into a histogram."""
    cells = []
    for row, rec in enumerate(records, start=1):
        try:
            cells.append(schema.encode_cell(rec))
        except DomainError as exc:
            raise IngestError(str(exc), row=row) from exc
    return Histogram.from_cells(schema, np.array(cells, dtype=np.uint64))


class DensityDistribution:
    """Sparse probability distribution over the cells of a schema.

    Stored masses are strictly positive and sum to one within ``1e-9``.
    """

    __slots__ = ("schema", "cells", "mass")

    def __init__(self, schema: Schema, cells, mass, *, normalize: bool = False):
        cells = _as_cells(cells)
        mass = np.asarray(mass, dtype=np.float64)
        if cells.shape != mass.shape:
            raise ValueError("cells and mass differ in length")
        if not np.isfinite(mass).all() or (mass < 0).any():
            raise ValueError("masses must be finite and nonnegative")
        schema.check_cells(cells)
        keep = mass > 0
        cells, mass = cells[keep], mass[keep]
        order = np.argsort(cells, kind="stable")
        cells, mass = cells[order], mass[order]
        if cells.size > 1 and (np.diff(cells) == 0).any():
            raise ValueError("duplicate cells")
        if cells.size == 0:
            raise EmptyDataError("a distribution needs a nonempty support")
        total = math.fsum(mass)
        if normalize:
            mass = mass / total
        elif abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        self.schema = schema
        self.cells = _frozen(cells)
        self.mass = _frozen(mass)

    @classmethod
    def from_dict(cls, schema: Schema, mass: Mapping[int, float], *, normalize: bool = False):
        return cls(schema, list(mass.keys()), list(mass.values()), normalize=normalize)

    @classmethod
    def uniform(cls, schema: Schema, max_cells: int = 10**7) -> "DensityDistribution":
        if schema.size > max_cells:
            raise ConfigError(f"uniform prior over {schema.size} cells exceeds limit {max_cells}")
        n = schema.size
        return cls(schema, np.arange(n, dtype=np.uint64), np.full(n, 1.0 / n), normalize=True)

    def to_dict(self) -> dict[int, float]:
        return {int(c): float(m) for c, m in zip(self.cells, self.mass)}

    def prob(self, cell: int) -> float:
        i = np.searchsorted(self.cells, np.uint64(cell))
        if i < self.cells.size and int(self.cells[i]) == int(cell):
            return float(self.mass[i])
        return 0.0

    def __len__(self) -> int:
        return int(self.cells.size)

    def __repr__(self) -> str:
        return f"DensityDistribution(support={len(self)})"


def normalize(hist: Histogram) -> DensityDistribution:
    if hist.total == 0:
        raise EmptyDataError("cannot normalise an empty histogram")
    return DensityDistribution(hist.schema, hist.cells, hist.counts / hist.total)


def kl_divergence(q: DensityDistribution, p: DensityDistribution) -> float:
    """Relative entropy of ``q`` with respect to ``p`` in nats (``inf`` off-support)."""
    if q.schema != p.schema:
        raise ConfigError("distributions are over different schemas")
    pos = np.searchsorted(p.cells, q.cells)
    pos_c = np.minimum(pos, max(p.cells.size - 1, 0))
    found = (pos < p.cells.size) & (p.cells[pos_c] == q.cells)
    if not found.all():
        return math.inf
    pm = p.mass[pos_c]
    return max(math.fsum(q.mass * np.log(q.mass / pm)), 0.0)
