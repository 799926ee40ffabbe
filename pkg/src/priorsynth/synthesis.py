"""Hierarchical synthesis: measure each state, then each (puma, year) group, then sample.

Every call of :func:`prior_update` spends ``epsilon0`` on a noisy count and
``epsilon0`` on the noisy workload.  Groups partition a state, so the state
pass and the group pass each cost ``2 * epsilon0`` per record and the whole
run costs ``4 * epsilon0 = epsilon``.
"""
from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .domain import DensityDistribution, Histogram, Schema
from .errors import BudgetError, ConfigError, EmptyDataError
from .estimation import DEFAULT_MAX_SUPPORT, ROUND_ROBIN, EstimationTrace, UpdateSchedule, ide
from .privacy import (
    BUDGET_TOL,
    PrivacyLedger,
    PrivacyParams,
    assert_budget,
    derive_rng,
    noisy_count,
    noisy_workload_answer,
)
from .workload import Workload

log = logging.getLogger(__name__)

GroupKey = tuple  # (puma: str, year: int)


@dataclass
class GroupedData:
    """Histograms keyed by ``(puma, year)`` plus the puma to state mapping.

    ``states`` maps a puma code, or a prefix of one, to a state key; the
    longest matching prefix wins.
    """

    schema: Schema
    groups: dict = field(default_factory=dict)
    states: Mapping[str, str] = field(default_factory=dict)
    issues: list = field(default_factory=list)

    def __post_init__(self):
        for key, hist in self.groups.items():
            if hist.schema != self.schema:
                raise ConfigError(f"group {key} has a different schema")

    def keys(self) -> list:
        return sorted(self.groups)

    def get(self, key) -> Histogram:
        return self.groups.get(key) or Histogram.empty(self.schema)

    def state_of(self, puma: str) -> str:
        puma = str(puma)
        if puma in self.states:
            return self.states[puma]
        best = max((p for p in self.states if puma.startswith(p)), key=len, default=None)
        if best is None:
            raise ConfigError(f"no state mapping for puma {puma!r}")
        return self.states[best]

    def by_state(self) -> dict[str, list]:
        out: dict[str, list] = {}
        for key in self.keys():
            out.setdefault(self.state_of(key[0]), []).append(key)
        return dict(sorted(out.items()))

    def pooled(self, keys=None) -> Histogram:
        keys = self.keys() if keys is None else keys
        total = Histogram.empty(self.schema)
        for key in keys:
            total = total + self.groups[key]
        return total

    @property
    def total(self) -> int:
        return sum(h.total for h in self.groups.values())


class PriorUpdate(NamedTuple):
    distribution: DensityDistribution
    n_noisy: int
    trace: EstimationTrace


def prior_update(
    workload: Workload,
    hist: Histogram,
    prior: DensityDistribution,
    iterations: int | None,
    epsilon0: float,
    rng,
    ledger: PrivacyLedger | None = None,
    scope=(),
    *,
    params: PrivacyParams | None = None,
    restrict: bool = True,
    schedule_mode: str = ROUND_ROBIN,
    schedule_rng: np.random.Generator | None = None,
    trace: bool = False,
    max_support: int = DEFAULT_MAX_SUPPORT,
) -> PriorUpdate:
    """Measure ``workload`` on ``hist`` with Laplace noise and move ``prior`` toward it.

    ``iterations=None`` uses twice the number of queries.
    """
    params = params or PrivacyParams(epsilon=4 * epsilon0)
    n_noisy = noisy_count(hist, params, epsilon0, rng, ledger, scope)
    answers = noisy_workload_answer(workload, hist, params, epsilon0, n_noisy, rng, ledger, scope)
    schedule = UpdateSchedule(iterations or 2 * len(workload), schedule_mode)
    dist, tr = ide(workload, answers, prior, schedule, restrict=restrict, rng=schedule_rng,
                   trace=trace, max_support=max_support)
    return PriorUpdate(dist, n_noisy, tr)


def sample_cells(dist: DensityDistribution, count: int, rng) -> np.ndarray:
    """``count`` i.i.d. cells by inverting the cumulative mass over index-sorted support."""
    if count < 0:
        raise ValueError("sample count must be nonnegative")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    if len(dist) == 0:
        raise EmptyDataError("cannot sample from an empty distribution")
    cum = np.cumsum(dist.mass)
    u = rng.random(count) * cum[-1]
    idx = np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)
    return dist.cells[idx]


def sample_records(dist: DensityDistribution, count: int, rng) -> list[tuple[str, ...]]:
    schema = dist.schema
    codes = schema.decode_codes(sample_cells(dist, count, rng))
    return [tuple(attr.labels[c] for attr, c in zip(schema.attributes, row)) for row in codes]


@dataclass
class SynthesisResult:
    synthetic: GroupedData
    ledger: PrivacyLedger
    group_counts: dict
    state_counts: dict
    traces: dict = field(default_factory=dict)


def synthesize(
    data: GroupedData,
    prior: DensityDistribution,
    state_workload: Workload,
    group_workload: Workload,
    params: PrivacyParams,
    iterations: int | None = None,
    seed: int = 0,
    *,
    restrict: bool = True,
    schedule_mode: str = ROUND_ROBIN,
    threads: int = 1,
    keep_traces: bool = False,
    rng_factory: Callable | None = None,
    max_support: int = DEFAULT_MAX_SUPPORT,
) -> SynthesisResult:
    """Run the state-then-group synthesis over ``data``.

    All randomness comes from streams derived from ``seed`` and labelled by
    purpose and scope, so results do not depend on ``threads`` or on the
    order groups are processed in.  ``rng_factory(purpose, *scope)`` overrides
    the stream derivation (used to inject deterministic noise in tests).
    """
    if prior.schema != data.schema:
        raise ConfigError("prior and data use different schemas")
    state_workload.check(data.schema)
    group_workload.check(data.schema)
    make_rng = rng_factory or functools.partial(derive_rng, seed)
    eps0 = params.epsilon0
    ledger = PrivacyLedger()
    common = dict(params=params, restrict=restrict, schedule_mode=schedule_mode,
                  trace=keep_traces, max_support=max_support)

    def run_group(state: str, state_prior: DensityDistribution, key):
        puma, year = key
        scope = (state, str(puma), str(year))
        upd = prior_update(group_workload, data.groups[key], state_prior, iterations, eps0,
                           make_rng("measure", *scope), ledger, scope,
                           schedule_rng=make_rng("schedule", *scope), **common)
        cells = sample_cells(upd.distribution, upd.n_noisy, make_rng("sample", *scope))
        return key, Histogram.from_cells(data.schema, cells), upd

    out_groups = {}
    group_counts = {}
    state_counts = {}
    traces = {}
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for state, keys in data.by_state().items():
            scope = (state,)
            pooled = data.pooled(keys)
            upd = prior_update(state_workload, pooled, prior, iterations, eps0,
                               make_rng("measure", *scope), ledger, scope,
                               schedule_rng=make_rng("schedule", *scope), **common)
            state_counts[state] = upd.n_noisy
            if keep_traces:
                traces[scope] = upd.trace
            for key, hist, gupd in pool.map(lambda k: run_group(state, upd.distribution, k), keys):
                out_groups[key] = hist
                group_counts[key] = gupd.n_noisy
                if keep_traces:
                    traces[(state, str(key[0]), str(key[1]))] = gupd.trace
            log.info("state %s: %d groups synthesised", state, len(keys))

    total = assert_budget(ledger, params)
    if data.groups and abs(total - params.epsilon) > BUDGET_TOL:
        raise BudgetError(f"ledger total {total!r} differs from epsilon {params.epsilon!r}")
    synthetic = GroupedData(data.schema, out_groups, dict(data.states))
    return SynthesisResult(synthetic, ledger, group_counts, state_counts, traces)
