"""
Iterative estimation from noisy marginals
=========================================

Measure two overlapping marginals of a private dataset with the Laplace
mechanism and estimate a distribution from them, starting at a public prior.
With noiseless answers the loop reduces to iterative proportional fitting.
"""

import numpy as np

from priorsynth import (
    Histogram,
    MarginalQuery,
    PrivacyLedger,
    PrivacyParams,
    Schema,
    UpdateSchedule,
    Workload,
    derive_rng,
    evaluate_marginal,
    ide,
    noisy_count,
    noisy_workload_answer,
    normalize,
    workload_l1_loss,
)

rng = np.random.default_rng(0)
schema = Schema.from_sizes([3, 3, 3])

# a private histogram and a loosely related public one
truth = rng.dirichlet(np.ones(schema.size) * 0.5)
private = Histogram(schema, np.arange(schema.size), rng.multinomial(5000, truth))
public = Histogram(schema, np.arange(schema.size), rng.multinomial(500, 0.5 * truth + 0.5 / schema.size))
prior = normalize(public)

workload = Workload((MarginalQuery((0, 1)), MarginalQuery((1, 2))))
exact = [evaluate_marginal(normalize(private), q) for q in workload]

# noiseless answers: the loop converges to the raking solution
q, trace = ide(workload, exact, prior, UpdateSchedule(40))
print("noiseless loss by iteration:", [f"{x:.1e}" for x in trace.loss[::8]])

# noisy answers at epsilon = 1, half on the count and half on the marginals
params = PrivacyParams(1.0)
ledger = PrivacyLedger()
measure = derive_rng(7, "measure")
n_noisy = noisy_count(private, params, 0.5, measure, ledger, ("demo",))
noisy = noisy_workload_answer(workload, private, params, 0.5, n_noisy, measure, ledger, ("demo",))
print("true count", private.total, "noisy count", n_noisy, "epsilon spent", ledger.total())

q_noisy, trace = ide(workload, noisy, prior, UpdateSchedule(8))
print("loss to noisy answers:", f"{trace.loss[0]:.3f} -> {workload_l1_loss(q_noisy, workload, noisy):.3f}")
print("loss to exact answers:", f"{workload_l1_loss(prior, workload, exact):.3f} -> "
      f"{workload_l1_loss(q_noisy, workload, exact):.3f}")

# the estimate never leaves the prior's support
print("support size:", len(q_noisy), "of", len(prior))
