"""Laplace mechanism primitives, seeded stream derivation and an epsilon ledger."""
from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import Histogram
from .errors import BudgetError, ConfigError
from .workload import MarginalVector, Workload, evaluate_marginal, workload_sensitivity

BUDGET_TOL = 1e-12


@dataclass(frozen=True)
class PrivacyParams:
    """Total budget ``epsilon`` and individual stability (max records per person)."""

    epsilon: float
    stability: int = 1

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError("epsilon must be a positive finite number")
        if int(self.stability) != self.stability or self.stability < 1:
            raise ConfigError("stability must be an integer >= 1")

    @property
    def epsilon0(self) -> float:
        return self.epsilon / 4


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *labels)``.

    Labels are hashed, so the stream depends only on the labels and not on the
    order in which streams are requested.
    """
    key = []
    for label in labels:
        digest = hashlib.sha256(json.dumps(label, default=str).encode()).digest()
        key.append(int.from_bytes(digest[:4], "little"))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def laplace_noise(scale: float, size, rng) -> np.ndarray:
    """Laplace(0, scale) draws by inverse CDF on uniforms from ``rng.random``."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = np.asarray(rng.random(size), dtype=np.float64)
    while np.any(u == 0.0):
        zero = u == 0.0
        u = np.where(zero, np.asarray(rng.random(u.shape), dtype=np.float64), u)
    c = u - 0.5
    return -scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))


def laplace_sample(scale: float, rng) -> float:
    return float(laplace_noise(scale, 1, rng)[0])


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class Charge:
    label: str
    epsilon: float
    scope: tuple[str, ...]


class PrivacyLedger:
    """Records epsilon charges against hierarchical data scopes.

    A scope is a tuple path such as ``("OH",)`` or ``("OH", "3901", "2012")``;
    a charge on a scope touches every partition below it.  Charges on one path
    add up (sequential composition) and disjoint paths take the maximum
    (parallel composition).
    """

    def __init__(self, charges: Iterable[Charge] = ()):
        self._charges: list[Charge] = list(charges)
        self._lock = threading.Lock()

    def charge(self, label: str, epsilon: float, scope: Sequence[str] = ()) -> None:
        if not epsilon > 0:
            raise ValueError("charges must be positive")
        rec = Charge(str(label), float(epsilon), tuple(str(s) for s in scope))
        with self._lock:
            self._charges.append(rec)

    @property
    def charges(self) -> list[Charge]:
        with self._lock:
            return list(self._charges)

    def total(self) -> float:
        charges = self.charges
        if not charges:
            return 0.0
        scopes = {c.scope for c in charges}
        best = 0.0
        for leaf in scopes:
            amount = math.fsum(c.epsilon for c in charges if leaf[: len(c.scope)] == c.scope)
            best = max(best, amount)
        return best

    def to_records(self) -> list[dict]:
        recs = [{"label": c.label, "epsilon": c.epsilon, "scope": list(c.scope)} for c in self.charges]
        return sorted(recs, key=lambda r: (r["scope"], r["label"]))

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "PrivacyLedger":
        return cls(Charge(r["label"], float(r["epsilon"]), tuple(r["scope"])) for r in records)


def ledger_total(ledger: PrivacyLedger) -> float:
    return ledger.total()


def assert_budget(ledger: PrivacyLedger, params: PrivacyParams | float) -> float:
    epsilon = params.epsilon if isinstance(params, PrivacyParams) else float(params)
    total = ledger.total()
    if total > epsilon + BUDGET_TOL:
        raise BudgetError(f"privacy budget overspent: {total!r} > {epsilon!r}")
    return total


def noisy_count(
    hist: Histogram,
    params: PrivacyParams,
    epsilon0: float,
    rng,
    ledger: PrivacyLedger | None = None,
    scope: Sequence[str] = (),
) -> int:
    """Noisy record count, clamped at zero and rounded half away from zero."""
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    noisy = hist.total + laplace_sample(params.stability / epsilon0, rng)
    if ledger is not None:
        ledger.charge("count", epsilon0, scope)
    return round_half_away(max(noisy, 0.0))


def noisy_workload_answer(
    workload: Workload,
    hist: Histogram,
    params: PrivacyParams,
    epsilon0: float,
    n_noisy: int,
    rng,
    ledger: PrivacyLedger | None = None,
    scope: Sequence[str] = (),
) -> list[MarginalVector]:
    """Laplace-perturbed marginal counts of every query, divided by the noisy count.

    A zero noisy count yields all-zero answers.
    """
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    scale = workload_sensitivity(workload) * params.stability / epsilon0
    answers = []
    for query in workload:
        counts = evaluate_marginal(hist, query).values
        noisy = counts + laplace_noise(scale, counts.shape, rng)
        if n_noisy == 0:
            noisy = np.zeros_like(counts)
        else:
            noisy = noisy / n_noisy
        answers.append(MarginalVector(query, noisy))
    if ledger is not None:
        ledger.charge("workload", epsilon0, scope)
    return answers
