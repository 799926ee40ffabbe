"""Command line entry point: ``priorsynth <command> --config run.json``.

Exit codes: 0 ok, 2 configuration, 3 data, 4 privacy budget, 5 internal.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .domain import kl_divergence, normalize
from .errors import BudgetError, ConfigError, PriorSynthError
from .estimation import workload_l1_loss
from .evaluation import contest_error
from .io import RunConfig, load_config, load_csv, read_json, read_workload, write_csv, write_json, write_workload
from .privacy import BUDGET_TOL, PrivacyLedger, derive_rng
from .selection import select_group_workload, select_state_workload
from .synthesis import prior_update, synthesize
from .workload import evaluate_marginal

log = logging.getLogger("priorsynth")


def _load(cfg: RunConfig, key: str):
    return load_csv(cfg.path(key), cfg.schema, puma_column=cfg.puma_column,
                    year_column=cfg.year_column, states=cfg.puma_to_state)


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.output_dir) if getattr(args, "output_dir", None) else cfg.paths.get("output_dir")
    if out is None:
        raise ConfigError("no output directory: pass --output-dir or set paths.output_dir")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workloads(cfg: RunConfig, public_hist):
    ws_path, wg_path = cfg.paths.get("state_workload"), cfg.paths.get("group_workload")
    if ws_path is not None and ws_path.exists():
        ws = read_workload(ws_path, cfg.schema)
    else:
        ws = select_state_workload(public_hist, cfg.edge_threshold, cfg.max_marginal_cells)
    if wg_path is not None and wg_path.exists():
        wg = read_workload(wg_path, cfg.schema)
    else:
        wg = select_group_workload(public_hist, cfg.independence_threshold)
    return ws, wg


def cmd_select_workload(cfg: RunConfig, args) -> int:
    if args.edge_threshold is not None:
        cfg.edge_threshold = args.edge_threshold
    if args.independence_threshold is not None:
        cfg.independence_threshold = args.independence_threshold
    if args.max_marginal_cells is not None:
        cfg.max_marginal_cells = args.max_marginal_cells
    public = _load(cfg, "public").pooled()
    ws = select_state_workload(public, cfg.edge_threshold, cfg.max_marginal_cells)
    wg = select_group_workload(public, cfg.independence_threshold)
    if args.output_dir:
        ws_path = Path(args.output_dir) / "state_workload.json"
        wg_path = Path(args.output_dir) / "group_workload.json"
    else:
        ws_path, wg_path = cfg.path("state_workload"), cfg.path("group_workload")
    write_workload(ws_path, ws, cfg.schema)
    write_workload(wg_path, wg, cfg.schema)
    print(f"state workload ({len(ws)} marginals) -> {ws_path}")
    print(f"group workload ({len(wg)} marginals) -> {wg_path}")
    return 0


def cmd_synthesize(cfg: RunConfig, args) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    out = _out_dir(cfg, args)
    public = _load(cfg, "public").pooled()
    private = _load(cfg, "private")
    prior = normalize(public)
    ws, wg = _workloads(cfg, public)
    result = synthesize(private, prior, ws, wg, cfg.privacy, cfg.iterations, seed,
                        restrict=cfg.support_restriction, schedule_mode=cfg.schedule,
                        threads=args.threads or os.cpu_count() or 1, keep_traces=args.traces)
    write_csv(out / "synthetic.csv", result.synthetic,
              puma_column=cfg.puma_column, year_column=cfg.year_column)
    report = {
        "config_version": cfg.raw.get("config_version"),
        "config_hash": cfg.config_hash,
        "seed": seed,
        "epsilon": cfg.privacy.epsilon,
        "epsilon0": cfg.privacy.epsilon0,
        "stability": cfg.privacy.stability,
        "iterations": cfg.iterations,
        "support_restriction": cfg.support_restriction,
        "schedule": cfg.schedule,
        "workloads": {"state": ws.to_names(cfg.schema), "group": wg.to_names(cfg.schema)},
        "ledger": {"charges": result.ledger.to_records(), "total": result.ledger.total()},
        "states": [{"state": s, "noisy_count": n} for s, n in sorted(result.state_counts.items())],
        "groups": [
            {"puma": k[0], "year": k[1], "state": private.state_of(k[0]), "noisy_count": n}
            for k, n in sorted(result.group_counts.items())
        ],
    }
    if args.traces:
        report["traces"] = {"/".join(k): t.to_records() for k, t in sorted(result.traces.items())}
    write_json(out / "run_report.json", report)
    print(f"synthetic data -> {out / 'synthetic.csv'}")
    print(f"run report -> {out / 'run_report.json'} (epsilon spent {result.ledger.total():g})")
    return 0


def cmd_estimate(cfg: RunConfig, args) -> int:
    """Single noisy measurement plus estimation on the pooled private data.

    The budget is split evenly between the noisy count and the workload.
    """
    seed = cfg.seed if args.seed is None else args.seed
    out = _out_dir(cfg, args)
    public = _load(cfg, "public").pooled()
    private = _load(cfg, "private").pooled()
    prior = normalize(public)
    if args.workload:
        workload = read_workload(args.workload, cfg.schema)
    else:
        workload, _ = _workloads(cfg, public)
    ledger = PrivacyLedger()
    eps0 = cfg.privacy.epsilon / 2
    upd = prior_update(workload, private, prior, cfg.iterations, eps0,
                       derive_rng(seed, "measure", "all"), ledger, ("all",),
                       params=cfg.privacy, restrict=cfg.support_restriction,
                       schedule_mode=cfg.schedule, schedule_rng=derive_rng(seed, "schedule", "all"),
                       trace=True)
    dist = upd.distribution
    top = np.argsort(-dist.mass, kind="stable")[: args.top]
    truth = normalize(private) if private.total else None
    report = {
        "config_hash": cfg.config_hash,
        "seed": seed,
        "workload": workload.to_names(cfg.schema),
        "noisy_count": upd.n_noisy,
        "ledger": {"charges": ledger.to_records(), "total": ledger.total()},
        "support_size": len(dist),
        "prior_support_size": len(prior),
        "kl_to_prior": kl_divergence(dist, prior),
        "workload_l1_to_truth": None if truth is None else workload_l1_loss(
            dist, workload, [evaluate_marginal(truth, q) for q in workload]),
        "top_cells": [
            {"cell": int(dist.cells[i]), "values": list(cfg.schema.decode_cell(int(dist.cells[i]))),
             "probability": float(dist.mass[i])}
            for i in top
        ],
        "trace": upd.trace.to_records(),
    }
    write_json(out / "estimate_report.json", report)
    print(f"estimate report -> {out / 'estimate_report.json'}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    reps = args.repetitions or cfg.repetitions
    seed = cfg.eval_seed if args.eval_seed is None else args.eval_seed
    kw = dict(puma_column=cfg.puma_column, year_column=cfg.year_column, states=cfg.puma_to_state)
    synthetic = load_csv(args.synthetic, cfg.schema, **kw)
    truth = load_csv(args.truth, cfg.schema, **kw)
    report = contest_error(synthetic, truth, reps, seed, bias_threshold=cfg.bias_threshold)
    prefix = Path(args.out) if args.out else Path(args.synthetic).with_name("eval_report")
    write_json(prefix.with_suffix(".json"), report.to_json())
    with open(prefix.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["puma", "year", "error", "penalized"])
        for g in report.groups:
            writer.writerow([g.puma, g.year, repr(g.error), int(g.penalized)])
    print(f"overall error {report.overall:.4f} over {len(report.groups)} groups "
          f"({report.n_penalized} penalized)")
    return 0


def cmd_audit_budget(args) -> int:
    report = read_json(args.report)
    try:
        epsilon = float(report["epsilon"])
        ledger = PrivacyLedger.from_records(report["ledger"]["charges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed run report: {exc}") from exc
    total = ledger.total()
    print(f"ledger total {total!r}, budget {epsilon!r}")
    if not math.isclose(total, epsilon, rel_tol=0.0, abs_tol=BUDGET_TOL):
        raise BudgetError(f"ledger total {total!r} != epsilon {epsilon!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorsynth", description="Private synthetic grouped data from noisy marginals and a public prior.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select-workload", help="pick state/group workloads from the public CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--edge-threshold", type=float)
    p.add_argument("--independence-threshold", type=float)
    p.add_argument("--max-marginal-cells", type=int)
    p.add_argument("--output-dir")

    p = sub.add_parser("synthesize", help="run the full private synthesis")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    p.add_argument("--output-dir")
    p.add_argument("--traces", action="store_true", help="include estimation traces in the report")

    p = sub.add_parser("estimate", help="one noisy measurement + estimation on pooled data")
    p.add_argument("--config", required=True)
    p.add_argument("--workload")
    p.add_argument("--seed", type=int)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--output-dir")

    p = sub.add_parser("evaluate", help="contest error between two CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--eval-seed", type=int)
    p.add_argument("--out", help="report path prefix (writes .json and .csv)")

    p = sub.add_parser("audit-budget", help="recompute the ledger total of a run report")
    p.add_argument("report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "audit-budget":
            return cmd_audit_budget(args)
        cfg = load_config(args.config)
        handler = {
            "select-workload": cmd_select_workload,
            "synthesize": cmd_synthesize,
            "estimate": cmd_estimate,
            "evaluate": cmd_evaluate,
        }[args.command]
        return handler(cfg, args)
    except PriorSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
