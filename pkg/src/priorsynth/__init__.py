"""Private synthetic data from noisy marginals and a public prior.

The estimator finds the distribution of least relative entropy to a public
prior whose marginals match differentially private measurements, one marginal
at a time, and samples synthetic records from it.
"""
from .domain import (
    Attribute,
    DensityDistribution,
    Histogram,
    Schema,
    decode_cell,
    encode_cell,
    histogram_from_records,
    kl_divergence,
    normalize,
)
from .errors import (
    BudgetError,
    CellRangeError,
    ConfigError,
    DataError,
    DomainError,
    EmptyDataError,
    IngestError,
    PriorSynthError,
)
from .estimation import EstimationTrace, UpdateSchedule, ide, update_distribution, workload_l1_loss
from .evaluation import EvalReport, contest_error
from .privacy import (
    PrivacyLedger,
    PrivacyParams,
    assert_budget,
    derive_rng,
    laplace_sample,
    ledger_total,
    noisy_count,
    noisy_workload_answer,
)
from .projection import ProjectedAnswer, lp_reference, project_full, project_partial
from .selection import mutual_information, select_group_workload, select_state_workload
from .synthesis import GroupedData, prior_update, sample_records, synthesize
from .workload import (
    MarginalQuery,
    MarginalVector,
    Workload,
    evaluate_marginal,
    validate_partial_workload,
    workload_sensitivity,
)

__all__ = [
    "assert_budget",
    "Attribute",
    "BudgetError",
    "CellRangeError",
    "ConfigError",
    "contest_error",
    "DataError",
    "decode_cell",
    "DensityDistribution",
    "derive_rng",
    "DomainError",
    "EmptyDataError",
    "encode_cell",
    "EstimationTrace",
    "EvalReport",
    "evaluate_marginal",
    "GroupedData",
    "Histogram",
    "histogram_from_records",
    "ide",
    "IngestError",
    "kl_divergence",
    "laplace_sample",
    "ledger_total",
    "lp_reference",
    "MarginalQuery",
    "MarginalVector",
    "mutual_information",
    "noisy_count",
    "noisy_workload_answer",
    "normalize",
    "prior_update",
    "PriorSynthError",
    "PrivacyLedger",
    "PrivacyParams",
    "project_full",
    "project_partial",
    "ProjectedAnswer",
    "sample_records",
    "Schema",
    "select_group_workload",
    "select_state_workload",
    "synthesize",
    "update_distribution",
    "UpdateSchedule",
    "validate_partial_workload",
    "Workload",
    "workload_l1_loss",
    "workload_sensitivity",
]

__version__ = "0.1.0"
