"""
One distribution update
=======================

A prior over a 2x2 domain is pushed toward a target marginal.  Blocks with
mass are rescaled, an empty block gets its target spread evenly, and a
partial answer leaves the uncovered cells to share what is left.
"""

import numpy as np

from priorsynth import DensityDistribution, MarginalQuery, Schema, kl_divergence, update_distribution

schema = Schema.from_sizes([2, 2], names=["A", "B"])
query = MarginalQuery((0,))  # the one-way marginal of A: blocks {0,1} and {2,3}


def show(label, dist):
    dense = np.zeros(schema.size)
    dense[dist.cells.astype(int)] = dist.mass
    print(f"{label:<28}", np.round(dense, 4))


prior = DensityDistribution(schema, [0, 1, 2, 3], [0.1, 0.2, 0.3, 0.4])
show("prior", prior)

# each block is rescaled to its target, keeping proportions inside the block
q = update_distribution(prior, query, [0.5, 0.5])
show("target A = [0.5, 0.5]", q)
print("relative entropy to prior:", round(kl_divergence(q, prior), 6))

# a block with no prior mass gets the target split evenly over its cells
empty = DensityDistribution(schema, [2, 3], [0.5, 0.5])
show("empty block, unrestricted", update_distribution(empty, query, [0.4, 0.6]))

# restricted to the prior's support the empty block cannot receive mass
show("empty block, restricted", update_distribution(empty, query, [0.4, 0.6], support=empty))

# only row 0 is constrained; the rest keeps its shape and takes 1 - 0.6
show("row 0 only = 0.6", update_distribution(prior, query, [0.6], rows=[0]))

# an answer the prior already satisfies changes nothing
show("fixed point", update_distribution(prior, query, [0.3, 0.7]))
