"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that is printed in the terminal
summary, so ``pytest tests/test_acceptance.py`` shows one verdict per
criterion.
"""
import contextlib
import json
import os
import time

import numpy as np
import pytest

from priorsynth import (
    DensityDistribution,
    GroupedData,
    Histogram,
    MarginalQuery,
    PrivacyParams,
    Schema,
    UpdateSchedule,
    Workload,
    contest_error,
    ide,
    mutual_information,
    normalize,
    project_full,
    project_partial,
    select_group_workload,
    select_state_workload,
    synthesize,
    update_distribution,
    workload_l1_loss,
)
from priorsynth.cli import main
from priorsynth.datasets import make_grouped_dataset
from priorsynth.io import load_config, load_csv
from priorsynth.projection import FULL, PARTIAL, lp_reference_batch
from priorsynth.synthesis import sample_cells
from priorsynth.workload import materialize

from conftest import ACCEPTANCE_RESULTS, write_run
from oracles import ipf, kl_minimizer, mutual_information_direct


@contextlib.contextmanager
def criterion(number, title):
    details = {}
    try:
        yield details
    except BaseException as exc:
        line = f"criterion {number} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)
        raise
    info = ", ".join(f"{k}={v}" for k, v in details.items())
    line = f"criterion {number} PASS  {title}" + (f" ({info})" if info else "")
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def dense(dist):
    out = np.zeros(dist.schema.size)
    out[np.asarray(dist.cells, dtype=np.int64)] = dist.mass
    return out


def feasible_points(rng, mat, covered_rows, y, n):
    """``n`` random z >= 0 with sum 1 and mat[covered_rows] @ z = y."""
    n_cells = mat.shape[1]
    z = np.zeros((n, n_cells))
    for i, row in enumerate(covered_rows):
        cells = np.flatnonzero(mat[row])
        z[:, cells] = y[i] * rng.dirichlet(np.ones(cells.size), size=n)
    rest = np.flatnonzero(mat[covered_rows].sum(axis=0) == 0)
    if rest.size:
        z[:, rest] = (1 - y.sum()) * rng.dirichlet(np.ones(rest.size), size=n)
    return z


def batch_kl(z, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(z > 0, z * np.log(z / p), 0.0)
    return terms.sum(axis=1)


def test_criterion_1_minimum_relative_entropy():
    with criterion(1, "update matches KL-minimiser oracle and beats random feasible points") as d:
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        worst_cell = 0.0
        worst_gap = np.inf
        n_partial = 0
        for _ in range(200):
            while True:
                sizes = list(rng.integers(2, 5, size=rng.integers(1, 4)))
                if int(np.prod(sizes)) <= 12:
                    break
            schema = Schema.from_sizes(sizes)
            n = schema.size
            attrs = tuple(sorted(rng.choice(len(sizes), size=rng.integers(1, len(sizes) + 1), replace=False)))
            query = MarginalQuery(attrs)
            mat = materialize(schema, query).astype(float)
            n_rows = mat.shape[0]
            p = rng.dirichlet(np.ones(n)) + 1e-3
            p /= p.sum()
            prior = DensityDistribution(schema, np.arange(n), p)
            if n_rows > 1 and rng.random() < 0.3:
                rows = np.sort(rng.choice(n_rows, size=rng.integers(1, n_rows), replace=False))
                y = rng.dirichlet(np.ones(rows.size + 1))[:-1]
                q = dense(update_distribution(prior, query, y, rows=rows))
                n_partial += 1
            else:
                rows = np.arange(n_rows)
                y = rng.dirichlet(np.ones(n_rows))
                q = dense(update_distribution(prior, query, y))
            oracle = kl_minimizer(p, mat[rows], y)
            worst_cell = max(worst_cell, float(np.abs(q - oracle).max()))
            kl_q = batch_kl(q[None, :], p)[0]
            z = feasible_points(rng, mat, rows, y, 10**4)
            # half of the points hug the candidate optimum
            t = rng.uniform(0, 0.05, size=(5000, 1))
            z[:5000] = (1 - t) * q + t * z[:5000]
            worst_gap = min(worst_gap, float((batch_kl(z, p) - kl_q).min()))
        elapsed = time.perf_counter() - start
        d.update(max_cell_error=f"{worst_cell:.1e}", min_kl_gap=f"{worst_gap:.1e}",
                 partial_instances=n_partial, seconds=f"{elapsed:.1f}")
        assert worst_cell <= 1e-4
        assert worst_gap >= -1e-9
        assert elapsed < 60


def test_criterion_2_projection_optimality():
    with criterion(2, "projections attain the LP optimum") as d:
        rng = np.random.default_rng(7)
        vecs = [rng.uniform(-1, 2, size=rng.integers(1, 21)) for _ in range(10**4)]
        start = time.perf_counter()
        worst = 0.0
        for mode, fn in ((FULL, project_full), (PARTIAL, project_partial)):
            achieved = np.array([fn(v).distance for v in vecs])
            reference = np.concatenate([lp_reference_batch(vecs[i:i + 500], mode)
                                        for i in range(0, len(vecs), 500)])
            worst = max(worst, float(np.abs(achieved - reference).max()))
        elapsed = time.perf_counter() - start
        d.update(max_gap=f"{worst:.1e}", seconds=f"{elapsed:.1f}")
        assert worst <= 1e-9
        assert elapsed < 10


def test_criterion_3_ipf_consistency():
    with criterion(3, "IDE on consistent margins converges to the IPF solution") as d:
        rng = np.random.default_rng(3)
        schema = Schema.from_sizes([3, 3, 3])
        prior = rng.dirichlet(np.ones(27)) + 0.01
        prior /= prior.sum()
        truth = rng.dirichlet(np.ones(27))
        wl = Workload((MarginalQuery((0, 1)), MarginalQuery((1, 2))))
        mats = [materialize(schema, q).astype(float) for q in wl]
        answers = [m @ truth for m in mats]
        q, _ = ide(wl, answers, DensityDistribution(schema, np.arange(27), prior), UpdateSchedule(100))
        loss = workload_l1_loss(q, wl, answers)
        gap = float(np.abs(dense(q) - ipf(prior, mats, answers)).max())
        d.update(loss=f"{loss:.1e}", max_cell_gap=f"{gap:.1e}")
        assert loss <= 1e-6
        assert gap <= 1e-6


SMALL = dict(sizes=(2, 3, 4, 3), parents=((), (0,), (1,), (2,)))


def test_criterion_4_privacy_accounting(tmp_path):
    with criterion(4, "ledger total equals epsilon and audit-budget exits 0") as d:
        fixtures = [(1, 1, 10.0), (1, 10, 1.0), (2, 5, 0.3), (3, 1, 7.7), (3, 10, 2.5), (2, 7, 0.1)]
        for k, (n_states, n_groups, eps) in enumerate(fixtures):
            data = make_grouped_dataset(n_states, n_groups, 150, seed=k, **SMALL)
            pub = data.pooled()
            ws, wg = select_state_workload(pub), select_group_workload(pub)
            res = synthesize(data, normalize(pub), ws, wg, PrivacyParams(eps), seed=k)
            assert res.ledger.total() == eps
            assert len(res.ledger.charges) == 2 * n_states + 2 * n_states * n_groups
            run_dir = tmp_path / f"run{k}"
            run_dir.mkdir()
            cfg = write_run(run_dir, data, privacy={"epsilon": eps, "stability": 1}, seed=k)
            assert main(["synthesize", "--config", str(cfg), "--threads", "1"]) == 0
            report = json.loads((run_dir / "out" / "run_report.json").read_text())
            assert report["ledger"]["total"] == eps
            assert main(["audit-budget", str(run_dir / "out" / "run_report.json")]) == 0
        d.update(fixtures=len(fixtures))


def prior_only_baseline(data, prior, seed):
    rng = np.random.default_rng(seed)
    groups = {k: Histogram.from_cells(data.schema, sample_cells(prior, h.total, rng))
              for k, h in data.groups.items()}
    return GroupedData(data.schema, groups, data.states)


@pytest.mark.slow
def test_criterion_5_end_to_end_quality():
    with criterion(5, "end-to-end quality on the generated 8-attribute fixture") as d:
        data = make_grouped_dataset(2, 25, 1000, seed=0)
        assert len(data.schema) == 8 and min(data.schema.sizes) >= 2 and max(data.schema.sizes) <= 10
        public = data.pooled()
        prior = normalize(public)
        params = PrivacyParams(10.0)
        start = time.perf_counter()
        ws, wg = select_state_workload(public), select_group_workload(public)
        result = synthesize(data, prior, ws, wg, params, seed=1, threads=1)
        report = contest_error(result.synthetic, data, 50, seed=0)
        elapsed = time.perf_counter() - start

        prior_only = contest_error(prior_only_baseline(data, prior, 5), data, 50, seed=0)
        uniform = synthesize(data, DensityDistribution.uniform(data.schema), ws, wg, params, seed=1, threads=1)
        uniform_err = contest_error(uniform.synthetic, data, 50, seed=0)
        d.update(error=f"{report.overall:.3f}", prior_only=f"{prior_only.overall:.3f}",
                 uniform_prior=f"{uniform_err.overall:.3f}", penalties=report.n_penalized,
                 seconds=f"{elapsed:.1f}")
        assert report.n_penalized == 0
        assert report.overall <= 0.8 * prior_only.overall
        assert report.overall <= 0.8 * uniform_err.overall
        assert report.overall < 0.5
        assert elapsed < 300


ACS_CONFIG = os.environ.get("PRIORSYNTH_ACS_CONFIG")


@pytest.mark.skipif(not ACS_CONFIG, reason="set PRIORSYNTH_ACS_CONFIG to a config for a real census extract")
def test_criterion_5_census_extract(tmp_path):
    with criterion("5b", "census extract error in 0.2-0.4 (+/-0.15)") as d:
        cfg = load_config(ACS_CONFIG)
        assert main(["synthesize", "--config", ACS_CONFIG, "--output-dir", str(tmp_path)]) == 0
        kw = dict(puma_column=cfg.puma_column, year_column=cfg.year_column, states=cfg.puma_to_state)
        synthetic = load_csv(tmp_path / "synthetic.csv", cfg.schema, **kw)
        truth = load_csv(cfg.path("private"), cfg.schema, **kw)
        err = contest_error(synthetic, truth, cfg.repetitions, cfg.eval_seed).overall
        d.update(error=f"{err:.3f}")
        assert 0.05 <= err <= 0.55


def test_criterion_6_determinism(tmp_path):
    with criterion(6, "synthesize output is byte-identical across runs and thread counts") as d:
        data = make_grouped_dataset(2, 5, 300, seed=11, **SMALL)
        cfg = write_run(tmp_path, data, seed=42)
        outputs = []
        for name, threads in (("a", 1), ("b", 1), ("c", 8)):
            assert main(["synthesize", "--config", str(cfg), "--threads", str(threads),
                         "--output-dir", str(tmp_path / name)]) == 0
            outputs.append(tuple((tmp_path / name / f).read_bytes() for f in ("synthetic.csv", "run_report.json")))
        assert outputs[0] == outputs[1] == outputs[2]
        d.update(runs=3, bytes=len(outputs[0][0]))


def test_criterion_7_support_restriction():
    with criterion(7, "every synthetic cell lies in the public prior's support") as d:
        checked = 0
        outside = 0
        for seed in range(4):
            data = make_grouped_dataset(2, 4, 400, seed=seed, **SMALL)
            # a small public sample so its support misses part of the domain
            public = make_grouped_dataset(1, 1, 60, seed=100 + seed, **SMALL).pooled()
            prior = normalize(public)
            support = set(prior.cells.tolist())
            outside += sum(c not in support for c in data.pooled().cells.tolist())
            ws, wg = select_state_workload(public), select_group_workload(public)
            res = synthesize(data, prior, ws, wg, PrivacyParams(10.0), seed=seed)
            for hist in res.synthetic.groups.values():
                assert set(hist.cells.tolist()) <= support
                checked += int(hist.total)
        assert outside > 0  # the private data does reach outside the prior support
        d.update(records_checked=checked, private_cells_outside_support=outside)


def test_criterion_8_mutual_information():
    with criterion(8, "mutual information matches the direct formula") as d:
        rng = np.random.default_rng(8)
        worst = 0.0
        worst_indep = 0.0
        for _ in range(100):
            ka, kb = rng.integers(2, 7, size=2)
            table = rng.integers(0, 30, size=(ka, kb))
            table[0, 0] += 1
            schema = Schema.from_sizes([ka, kb])
            cells = [schema.encode_cell([str(i), str(j)]) for i in range(ka) for j in range(kb)]
            hist = Histogram(schema, cells, table.ravel())
            worst = max(worst, abs(mutual_information(hist, 0, 1) - mutual_information_direct(table)))
            indep = np.outer(rng.integers(1, 10, size=ka), rng.integers(1, 10, size=kb))
            ihist = Histogram(schema, cells, indep.ravel())
            worst_indep = max(worst_indep, abs(mutual_information(ihist, 0, 1)))
        d.update(max_error=f"{worst:.1e}", max_independent=f"{worst_indep:.1e}")
        assert worst <= 1e-12
        assert worst_indep <= 1e-12
