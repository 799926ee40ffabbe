"""Data-dependent workload selection from a public histogram.

Attribute pairs with high plug-in mutual information become edges of a graph;
maximal cliques of that graph are the state-level marginals.  The group-level
workload is a set of one-way marginals over attributes that look independent
in the public data.  Everything here reads public data only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .domain import Histogram
from .errors import ConfigError, EmptyDataError
from .workload import MarginalQuery, Workload, evaluate_marginal

DEFAULT_EDGE_THRESHOLD = 0.1
DEFAULT_INDEPENDENCE_THRESHOLD = 0.05
DEFAULT_MAX_MARGINAL_CELLS = 10**6


def mutual_information(hist: Histogram, a: int, b: int) -> float:
    """Plug-in mutual information (nats) between attributes ``a`` and ``b``."""
    if a == b:
        raise ConfigError("mutual information needs two distinct attributes")
    if hist.total == 0:
        raise EmptyDataError("mutual information of an empty histogram")
    lo, hi = min(a, b), max(a, b)
    schema = hist.schema
    joint = evaluate_marginal(hist, MarginalQuery((lo, hi))).values
    joint = joint.reshape(schema.sizes[lo], schema.sizes[hi]) / hist.total
    p_lo = joint.sum(axis=1)
    p_hi = joint.sum(axis=0)
    nz = joint > 0
    expected = np.outer(p_lo, p_hi)
    mi = math.fsum(joint[nz] * np.log(joint[nz] / expected[nz]))
    return max(mi, 0.0)


@dataclass(frozen=True)
class MIGraph:
    mi: np.ndarray
    threshold: float

    @property
    def edges(self) -> list[tuple[int, int]]:
        m = self.mi.shape[0]
        return [(i, j) for i, j in itertools.combinations(range(m), 2) if self.mi[i, j] >= self.threshold]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.mi.shape[0]))
        g.add_weighted_edges_from((i, j, self.mi[i, j]) for i, j in self.edges)
        return g


def mi_matrix(hist: Histogram) -> np.ndarray:
    m = len(hist.schema)
    out = np.zeros((m, m))
    for i, j in itertools.combinations(range(m), 2):
        out[i, j] = out[j, i] = mutual_information(hist, i, j)
    return out


def mi_graph(hist: Histogram, threshold: float = DEFAULT_EDGE_THRESHOLD) -> MIGraph:
    return MIGraph(mi_matrix(hist), threshold)


def _cells(sizes, attrs) -> int:
    out = 1
    for a in attrs:
        out *= sizes[a]
    return out


def _shrink(clique: tuple[int, ...], mi: np.ndarray, sizes, cap: int) -> tuple[int, ...] | None:
    """Largest greedy sub-clique under the cell cap, grown from the best pair that fits."""
    if _cells(sizes, clique) <= cap:
        return clique
    pairs = sorted(itertools.combinations(clique, 2), key=lambda pr: (-mi[pr], pr))
    seed = next((pr for pr in pairs if _cells(sizes, pr) <= cap), None)
    if seed is None:
        return None
    chosen = list(seed)
    while True:
        options = [
            (-sum(mi[r, c] for c in chosen), r)
            for r in clique
            if r not in chosen and _cells(sizes, chosen + [r]) <= cap
        ]
        if not options:
            break
        chosen.append(min(options)[1])
    return tuple(sorted(chosen))


def select_state_workload(
    hist: Histogram,
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD,
    max_marginal_cells: int = DEFAULT_MAX_MARGINAL_CELLS,
) -> Workload:
    """Marginals over maximal cliques of the MI graph, heaviest first.

    Cliques whose marginal exceeds ``max_marginal_cells`` are shrunk; any
    attribute left uncovered gets its own one-way marginal.
    """
    schema = hist.schema
    if len(schema) < 2:
        raise ConfigError("state workload selection needs at least two attributes")
    graph = mi_graph(hist, edge_threshold)
    mi = graph.mi
    cliques = [tuple(sorted(c)) for c in nx.find_cliques(graph.to_networkx()) if len(c) >= 2]
    cliques.sort(key=lambda c: (-sum(mi[i, j] for i, j in itertools.combinations(c, 2)), c))

    chosen: list[tuple[int, ...]] = []
    for clique in cliques:
        fitted = _shrink(clique, mi, schema.sizes, max_marginal_cells)
        if fitted is None or any(set(fitted) <= set(c) for c in chosen):
            continue
        chosen.append(fitted)
    covered = set(itertools.chain.from_iterable(chosen))
    chosen.extend((a,) for a in range(len(schema)) if a not in covered)
    return Workload(tuple(MarginalQuery(c) for c in chosen))


def select_group_workload(
    hist: Histogram,
    independence_threshold: float = DEFAULT_INDEPENDENCE_THRESHOLD,
) -> Workload:
    """One-way marginals over a greedily built set of nearly independent attributes.

    Starts from the first attribute and repeatedly adds the attribute whose
    largest MI with the chosen set is smallest, while that MI stays below
    ``independence_threshold``.
    """
    schema = hist.schema
    m = len(schema)
    mi = mi_matrix(hist) if m > 1 else np.zeros((1, 1))
    chosen = [0]
    while True:
        options = []
        for r in range(m):
            if r in chosen:
                continue
            worst = max(mi[r, c] for c in chosen)
            if worst < independence_threshold:
                options.append((worst, r))
        if not options:
            break
        chosen.append(min(options)[1])
    return Workload(tuple(MarginalQuery((a,)) for a in sorted(chosen)))
