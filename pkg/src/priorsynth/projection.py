"""Closest feasible marginal answer in L1 distance.

``project_full`` maps a noisy answer onto the probability simplex (entries
nonnegative, sum one) and ``project_partial`` onto the sub-simplex (sum at most
one).  Once negatives are clipped every further unit of added or removed mass
costs exactly one, so the L1 projection is not unique; both functions rescale
proportionally, which attains the optimum and keeps the shape of the input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FULL = "full"
PARTIAL = "partial"


@dataclass(frozen=True)
class ProjectedAnswer:
    values: np.ndarray = field(repr=False)
    distance: float
    mode: str = FULL


def _checked(noisy) -> np.ndarray:
    arr = np.asarray(noisy, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.isfinite(arr).all():
        raise ValueError("noisy answer contains NaN or infinite entries")
    return arr


def _l1(a: np.ndarray, b: np.ndarray) -> float:
    return math.fsum(np.abs(a - b))


def project_full(noisy) -> ProjectedAnswer:
    """Nearest point of ``{y >= 0, sum(y) = 1}``; uniform if nothing is positive."""
    arr = _checked(noisy)
    clipped = np.maximum(arr, 0.0)
    total = math.fsum(clipped)
    if total > 0:
        values = clipped / total
    else:
        values = np.full(arr.size, 1.0 / arr.size)
    return ProjectedAnswer(values, _l1(values, arr), FULL)


def project_partial(noisy) -> ProjectedAnswer:
    """Nearest point of ``{y >= 0, sum(y) <= 1}``."""
    arr = _checked(noisy)
    clipped = np.maximum(arr, 0.0)
    total = math.fsum(clipped)
    values = clipped / total if total > 1.0 else clipped
    return ProjectedAnswer(values, _l1(values, arr), PARTIAL)


def project(noisy, mode: str = FULL) -> ProjectedAnswer:
    if mode == FULL:
        return project_full(noisy)
    if mode == PARTIAL:
        return project_partial(noisy)
    raise ValueError(f"unknown projection mode {mode!r}")


def lp_reference_batch(vectors: Sequence[np.ndarray], mode: str = FULL) -> np.ndarray:
    """Optimal L1 distances from an explicit linear program, one per vector.

    Test oracle.  Each vector ``t`` gets split variables ``u, v >= 0`` with
    ``y = t + u - v >= 0`` and objective ``sum(u + v)``; the simplex constraint
    becomes ``sum(u - v) = 1 - sum(t)`` (or ``<=`` in partial mode).  Vectors are
    stacked block-diagonally into one sparse LP and solved by HiGHS simplex.
    """
    vectors = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    sizes = np.array([v.size for v in vectors])
    n = int(sizes.sum())
    target = np.concatenate(vectors)
    owner = np.repeat(np.arange(len(vectors)), sizes)
    eye = sp.identity(n, format="csr")
    nonneg = sp.hstack([-eye, eye])
    group = sp.csr_matrix((np.ones(n), (owner, np.arange(n))), shape=(len(vectors), n))
    simplex = sp.hstack([group, -group])
    rhs = 1.0 - np.array([v.sum() for v in vectors])
    cost = np.ones(2 * n)
    if mode == FULL:
        res = linprog(cost, A_ub=nonneg, b_ub=target, A_eq=simplex, b_eq=rhs,
                      bounds=(0, None), method="highs-ds")
    elif mode == PARTIAL:
        res = linprog(cost, A_ub=sp.vstack([nonneg, simplex]), b_ub=np.concatenate([target, rhs]),
                      bounds=(0, None), method="highs-ds")
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    if res.status != 0:
        raise RuntimeError(f"reference LP failed: {res.message}")
    return np.bincount(owner, weights=res.x[:n] + res.x[n:], minlength=len(vectors))


def lp_reference(noisy, mode: str = FULL) -> float:
    arr = np.asarray(noisy, dtype=np.float64).ravel()
    if arr.size > 1000:
        raise ValueError("lp_reference is meant for test-scale vectors (<= 1000 entries)")
    return float(lp_reference_batch([arr], mode)[0])
