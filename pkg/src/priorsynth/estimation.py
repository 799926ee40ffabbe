"""Minimum relative entropy updates and the iterative estimation loop.

One update takes a distribution ``p``, one marginal query and a feasible
answer ``y`` for (some of) its rows, and returns the distribution closest to
``p`` in relative entropy whose marginal equals ``y``:

* a covered cell in a block with positive mass is rescaled by ``y[i] / block``;
* a covered block without mass receives ``y[i]`` spread evenly over its cells;
* uncovered cells share the leftover ``1 - sum(y)`` in proportion to ``p``,
  or evenly when they carry no mass.

With ``support`` given, "its cells" means the cells of the block inside that
support, which keeps every iterate on the support of the public prior.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import DensityDistribution, Schema, _as_cells, kl_divergence
from .errors import ConfigError
from .projection import FULL, PARTIAL, ProjectedAnswer, project
from .workload import MarginalQuery, MarginalVector, Workload, evaluate_marginal

log = logging.getLogger(__name__)

PRUNE_BELOW = 1e-15
FEASIBILITY_TOL = 1e-9
DEFAULT_MAX_SUPPORT = 10**6

ROUND_ROBIN = "round-robin"
RANDOM = "seeded-random"


@dataclass(frozen=True)
class UpdateSchedule:
    """Order in which queries are visited and how many updates to run."""

    iterations: int
    mode: str = ROUND_ROBIN
    seed: int = 0

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError("the iteration budget T must be a positive integer")
        if self.mode not in (ROUND_ROBIN, RANDOM):
            raise ConfigError(f"unknown schedule mode {self.mode!r}")

    @classmethod
    def default(cls, workload: Workload, **kwargs) -> "UpdateSchedule":
        return cls(2 * len(workload), **kwargs)

    def order(self, n_queries: int, rng: np.random.Generator | None = None) -> list[int]:
        if self.mode == ROUND_ROBIN:
            return [t % n_queries for t in range(self.iterations)]
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        return [int(i) for i in rng.integers(0, n_queries, size=self.iterations)]


@dataclass
class EstimationTrace:
    """Per-iteration query id, global L1 loss before the update and KL to the prior after it."""

    query: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.query)

    def append(self, query: int, loss: float, kl: float) -> None:
        self.query.append(query)
        self.loss.append(loss)
        self.kl.append(kl)

    def to_records(self) -> list[dict]:
        return [{"iteration": t + 1, "query": q, "loss": l, "kl_to_prior": k}
                for t, (q, l, k) in enumerate(zip(self.query, self.loss, self.kl))]


def _new_masses(mass: np.ndarray, rows: np.ndarray, n_rows: int,
                target: np.ndarray, covered: np.ndarray) -> np.ndarray:
    """One distribution update on a fixed set of eligible cells.

    ``target`` is the answer per marginal row (zero where not covered) and
    ``covered`` flags the rows that belong to the partial workload.
    """
    block = np.bincount(rows, weights=mass, minlength=n_rows)
    n_cells = np.bincount(rows, minlength=n_rows)
    out = np.zeros_like(mass)
    cell_covered = covered[rows]
    block_mass = block[rows]

    scaled = cell_covered & (block_mass > 0)
    out[scaled] = mass[scaled] * target[rows[scaled]] / block_mass[scaled]
    spread = cell_covered & ~(block_mass > 0)
    out[spread] = target[rows[spread]] / n_cells[rows[spread]]

    rest = ~cell_covered
    if rest.any():
        leftover = max(1.0 - math.fsum(target[covered]), 0.0)
        rest_mass = math.fsum(mass[rest])
        if rest_mass > 0:
            out[rest] = mass[rest] * (leftover / rest_mass)
        else:
            out[rest] = leftover / np.count_nonzero(rest)
    return out


def _tidy(mass: np.ndarray) -> np.ndarray | None:
    """Prune floating-point dust and renormalise; ``None`` if nothing is left."""
    mass = np.where(mass < PRUNE_BELOW, 0.0, mass)
    total = math.fsum(mass)
    if total <= 0:
        return None
    return mass / total


def _target_vector(query: MarginalQuery, schema: Schema, answer, rows) -> tuple[np.ndarray, np.ndarray, str]:
    n_rows = query.size(schema)
    values = answer.values if isinstance(answer, ProjectedAnswer) else np.asarray(answer, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64).ravel()
    if rows is None:
        if values.size != n_rows:
            raise ConfigError(f"answer has {values.size} entries, query has {n_rows} rows")
        covered = np.ones(n_rows, dtype=bool)
        target = values
        mode = FULL
    else:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        if rows.size == 0 or rows.min() < 0 or rows.max() >= n_rows or np.unique(rows).size != rows.size:
            raise ConfigError("partial rows must be distinct indices of the query's rows")
        if values.size != rows.size:
            raise ConfigError("answer length does not match the partial rows")
        covered = np.zeros(n_rows, dtype=bool)
        covered[rows] = True
        target = np.zeros(n_rows)
        target[rows] = values
        mode = FULL if rows.size == n_rows else PARTIAL
    if not np.isfinite(values).all() or (values < 0).any():
        raise ValueError("answer must be finite and nonnegative")
    total = math.fsum(values)
    if mode == FULL and abs(total - 1.0) > FEASIBILITY_TOL:
        raise ValueError(f"full-coverage answer must sum to 1, sums to {total!r}")
    if total > 1.0 + FEASIBILITY_TOL:
        raise ValueError(f"answer sums to {total!r} > 1")
    return target, covered, mode


def update_distribution(
    p: DensityDistribution,
    query: MarginalQuery,
    answer,
    *,
    rows: Sequence[int] | None = None,
    support=None,
    max_support: int = DEFAULT_MAX_SUPPORT,
) -> DensityDistribution:
    """Least relative entropy update of ``p`` so that its ``query`` marginal equals ``answer``.

    Parameters
    ----------
    p : DensityDistribution
        Current distribution.
    query : MarginalQuery
        The partial workload.
    answer : ProjectedAnswer or array
        Feasible answer, one entry per row (or per entry of ``rows``).
    rows : sequence of int, optional
        Restrict the partial workload to these marginal rows; the remaining
        cells are "uncovered" and share the leftover mass.
    support : DensityDistribution or array of cells, optional
        If given, mass may only be placed on these cells (plus the support of
        ``p``).  If omitted, empty blocks spread their mass over the whole
        block, which may create new support cells, up to ``max_support``.
    """
    schema = p.schema
    target, covered, _ = _target_vector(query, schema, answer, rows)
    n_rows = covered.size

    if support is not None:
        allowed = support.cells if isinstance(support, DensityDistribution) else _as_cells(support)
        cells = np.union1d(p.cells, allowed)
    else:
        cells = np.asarray(p.cells)
        p_rows = query.rows_of(schema, cells)
        block = np.bincount(p_rows, weights=p.mass, minlength=n_rows)
        extra = []
        n_new = 0
        for i in np.flatnonzero(covered & (block <= 0) & (target > 0)):
            n_new += query.block_size(schema)
            if cells.size + n_new > max_support:
                raise ConfigError(f"unrestricted update would exceed {max_support} support cells")
            extra.append(query.block_cells(schema, int(i)))
        uncovered_mass = math.fsum(p.mass[~covered[p_rows]])
        if (~covered).any() and uncovered_mass <= 0 and math.fsum(target) < 1.0:
            n_new += int((~covered).sum()) * query.block_size(schema)
            if cells.size + n_new > max_support:
                raise ConfigError(f"unrestricted update would exceed {max_support} support cells")
            extra.extend(query.block_cells(schema, int(i)) for i in np.flatnonzero(~covered))
        if extra:
            cells = np.union1d(cells, np.concatenate(extra))

    mass = np.zeros(cells.size)
    pos = np.searchsorted(cells, p.cells)
    mass[pos] = p.mass
    rows_of_cells = query.rows_of(schema, cells)
    new = _tidy(_new_masses(mass, rows_of_cells, n_rows, target, covered))
    if new is None:
        log.warning("update left no mass on the allowed support; keeping the previous distribution")
        return p
    return DensityDistribution(schema, cells, new, normalize=True)


def _as_answers(workload: Workload, noisy) -> list[np.ndarray]:
    answers = [v.values if isinstance(v, MarginalVector) else np.asarray(v, dtype=np.float64) for v in noisy]
    if len(answers) != len(workload):
        raise ConfigError(f"{len(answers)} noisy answers for {len(workload)} queries")
    return answers


def workload_l1_loss(q: DensityDistribution, workload: Workload, noisy) -> float:
    """Sum over queries of the L1 distance between the query's answer on ``q`` and ``noisy``."""
    answers = _as_answers(workload, noisy)
    return math.fsum(
        math.fsum(np.abs(evaluate_marginal(q, query).values - ans))
        for query, ans in zip(workload, answers)
    )


def _kl_on_cells(mass: np.ndarray, prior: np.ndarray) -> float:
    pos = mass > 0
    return max(math.fsum(mass[pos] * np.log(mass[pos] / prior[pos])), 0.0)


def ide(
    workload: Workload,
    noisy,
    prior: DensityDistribution,
    schedule: UpdateSchedule | None = None,
    *,
    restrict: bool = True,
    rng: np.random.Generator | None = None,
    trace: bool = True,
    max_support: int = DEFAULT_MAX_SUPPORT,
) -> tuple[DensityDistribution, EstimationTrace]:
    """Iterative distribution estimation.

    Starting from ``prior``, repeatedly pick a query, project its noisy answer
    onto the simplex and apply :func:`update_distribution`, treating the result
    as the new prior.  With ``restrict`` (the default) every iterate lives on
    the support of ``prior``.
    """
    schema = prior.schema
    workload.check(schema)
    answers = _as_answers(workload, noisy)
    for query, ans in zip(workload, answers):
        if ans.size != query.size(schema):
            raise ConfigError(f"noisy answer for {query.attrs} has wrong length")
    schedule = schedule or UpdateSchedule.default(workload)
    order = schedule.order(len(workload), rng)
    projected = {}
    out_trace = EstimationTrace()

    if not restrict:
        q = prior
        for i in order:
            if trace:
                loss = workload_l1_loss(q, workload, answers)
            if i not in projected:
                projected[i] = project(answers[i], FULL)
            q = update_distribution(q, workload[i], projected[i], max_support=max_support)
            if trace:
                out_trace.append(i, loss, kl_divergence(q, prior))
        return q, out_trace

    cells = prior.cells
    base = np.asarray(prior.mass)
    mass = base.copy()
    rows: dict[int, np.ndarray] = {}
    sizes = [query.size(schema) for query in workload]

    def rows_for(k: int) -> np.ndarray:
        if k not in rows:
            rows[k] = workload[k].rows_of(schema, cells)
        return rows[k]

    for i in order:
        if trace:
            loss = math.fsum(
                math.fsum(np.abs(np.bincount(rows_for(k), weights=mass, minlength=sizes[k]) - answers[k]))
                for k in range(len(workload))
            )
        if i not in projected:
            projected[i] = project(answers[i], FULL).values
        new = _tidy(_new_masses(mass, rows_for(i), sizes[i], projected[i], np.ones(sizes[i], dtype=bool)))
        if new is None:
            log.warning("query %d has no answer mass on the prior support; update skipped", i)
        else:
            mass = new
        if trace:
            out_trace.append(i, loss, _kl_on_cells(mass, base))
    return DensityDistribution(schema, cells, mass, normalize=True), out_trace

