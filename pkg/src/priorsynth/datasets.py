"""Synthetic grouped census-like data for demos and end-to-end tests.

Records come from a small Bayesian network in which every attribute also
depends on a hidden class.  The mix of hidden classes varies from state to
state and from group to group; all conditional tables are shared, so pooled
public data carries the correlation structure while each group shifts the mix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Histogram, Schema
from .synthesis import GroupedData

DEFAULT_SIZES = (2, 3, 4, 5, 6, 8, 10, 3)
# parents of each attribute (indices of earlier attributes)
DEFAULT_PARENTS = ((), (), (0, 1), (), (3,), (2, 4), (1, 5), (5,))


@dataclass
class NetworkModel:
    """Bayesian network in which every attribute also depends on a hidden class."""

    sizes: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    tables: list  # tables[i][parent_config * latent_size + latent] -> probabilities
    latent_size: int

    def sample(self, n: int, latent_probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        latent = rng.choice(self.latent_size, size=n, p=latent_probs)
        codes = np.zeros((n, len(self.sizes)), dtype=np.int64)
        for i, (k, pa) in enumerate(zip(self.sizes, self.parents)):
            config = np.zeros(n, dtype=np.int64)
            for j in pa:
                config = config * self.sizes[j] + codes[:, j]
            probs = self.tables[i][config * self.latent_size + latent]
            cum = np.cumsum(probs, axis=1)
            u = rng.random(n)[:, None]
            codes[:, i] = np.minimum((u > cum).sum(axis=1), k - 1)
        return codes


def make_network(sizes=DEFAULT_SIZES, parents=DEFAULT_PARENTS, *, latent_size: int = 4,
                 concentration: float = 0.7, seed: int = 0) -> NetworkModel:
    """Random conditional tables; smaller ``concentration`` means stronger dependence."""
    rng = np.random.default_rng(seed)
    tables = []
    for k, pa in zip(sizes, parents):
        n_configs = int(np.prod([sizes[j] for j in pa])) * latent_size
        tables.append(rng.dirichlet(np.full(k, concentration), size=n_configs))
    return NetworkModel(tuple(sizes), tuple(tuple(p) for p in parents), tables, latent_size)


def make_grouped_dataset(
    n_states: int = 2,
    groups_per_state: int = 25,
    rows_per_group: int = 1000,
    *,
    sizes=DEFAULT_SIZES,
    parents=DEFAULT_PARENTS,
    latent_size: int = 4,
    concentration: float = 0.7,
    state_concentration: float = 2.0,
    group_concentration: float = 1.0,
    row_jitter: float = 0.1,
    seed: int = 0,
) -> GroupedData:
    """Grouped dataset with ``n_states * groups_per_state`` (puma, year) groups.

    Each group draws its own mix of the hidden classes around a per-state
    mix; smaller ``group_concentration`` makes groups differ more.  Pumas are
    named ``"<state>-<nn>"`` and the returned data maps each state prefix to
    its state.  Group sizes vary uniformly by ``row_jitter``.
    """
    rng = np.random.default_rng(seed)
    model = make_network(sizes, parents, latent_size=latent_size,
                         concentration=concentration, seed=seed + 1)
    schema = Schema.from_sizes(sizes)
    groups = {}
    states = {}
    years = (2012, 2013, 2014, 2015, 2016, 2017, 2018)
    for s in range(n_states):
        state = f"S{s}"
        states[f"{state}-"] = state
        base = rng.dirichlet(np.full(latent_size, state_concentration))
        for g in range(groups_per_state):
            puma = f"{state}-{g // len(years):02d}"
            year = years[g % len(years)]
            mix = rng.dirichlet(group_concentration * latent_size * base + 1e-3)
            n = int(round(rows_per_group * (1 + rng.uniform(-row_jitter, row_jitter))))
            codes = model.sample(n, mix, rng)
            groups[(puma, year)] = Histogram.from_cells(schema, schema.encode_codes(codes))
    return GroupedData(schema, groups, states)
