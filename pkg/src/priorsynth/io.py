"""Run configuration, CSV ingestion/emission, workload files and JSON reports.

The run configuration is a JSON document::

    {
      "config_version": 1,
      "schema": {"attributes": [
          {"name": "SEX", "labels": ["1", "2"]},
          {"name": "AGE", "labels": ["0-17", "18-64", "65+"], "bins": [0, 18, 65, null]}
      ]},
      "columns": {"puma": "PUMA", "year": "YEAR"},
      "puma_to_state": {"17-": "IL", "39-": "OH"},
      "privacy": {"epsilon": 10.0, "stability": 1},
      "iterations": null,
      "selection": {"edge_threshold": 0.1, "independence_threshold": 0.05,
                    "max_marginal_cells": 1000000},
      "paths": {"public": "public.csv", "private": "private.csv",
                "state_workload": "ws.json", "group_workload": "wg.json",
                "output_dir": "out"},
      "seed": 0,
      "support_restriction": true,
      "schedule": "round-robin",
      "evaluation": {"repetitions": 50, "seed": 0, "bias_threshold": 250}
    }

Relative paths resolve against the directory holding the config file.  A
``null`` bin edge means +infinity.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .domain import Histogram, Schema
from .errors import ConfigError, DataError, DomainError, IngestError
from .estimation import RANDOM, ROUND_ROBIN
from .privacy import PrivacyParams
from .selection import (
    DEFAULT_EDGE_THRESHOLD,
    DEFAULT_INDEPENDENCE_THRESHOLD,
    DEFAULT_MAX_MARGINAL_CELLS,
)
from .synthesis import GroupedData
from .workload import Workload

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
_PATH_KEYS = ("public", "private", "state_workload", "group_workload", "output_dir")


@dataclass
class RunConfig:
    schema: Schema
    privacy: PrivacyParams
    puma_to_state: dict[str, str] = field(default_factory=dict)
    iterations: int | None = None
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    independence_threshold: float = DEFAULT_INDEPENDENCE_THRESHOLD
    max_marginal_cells: int = DEFAULT_MAX_MARGINAL_CELLS
    paths: dict[str, Path | None] = field(default_factory=dict)
    seed: int = 0
    support_restriction: bool = True
    schedule: str = ROUND_ROBIN
    repetitions: int = 50
    eval_seed: int = 0
    bias_threshold: int = 250
    puma_column: str = "PUMA"
    year_column: str = "YEAR"
    raw: dict = field(default_factory=dict, repr=False)

    def path(self, key: str) -> Path:
        value = self.paths.get(key)
        if value is None:
            raise ConfigError(f"config does not set paths.{key}")
        return value

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(raw: Mapping[str, Any], base_dir: Path | str = ".") -> RunConfig:
    """Validate a config mapping and build a :class:`RunConfig`."""
    raw = dict(raw)
    version = raw.get("config_version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {version!r}, expected {CONFIG_VERSION}")
    if "schema" not in raw:
        raise ConfigError("config needs a schema")
    schema = Schema.from_dict(raw["schema"])
    priv = raw.get("privacy", {})
    try:
        privacy = PrivacyParams(float(priv["epsilon"]), int(priv.get("stability", 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad privacy section: {exc}") from exc
    iterations = raw.get("iterations")
    if iterations is not None and (int(iterations) != iterations or iterations < 1):
        raise ConfigError("iterations must be a positive integer or null")
    sel = raw.get("selection", {})
    ev = raw.get("evaluation", {})
    cols = raw.get("columns", {})
    base = Path(base_dir)
    paths = {}
    for key in _PATH_KEYS:
        value = raw.get("paths", {}).get(key)
        paths[key] = None if value is None else (base / value)
    schedule = raw.get("schedule", ROUND_ROBIN)
    if schedule not in (ROUND_ROBIN, RANDOM):
        raise ConfigError(f"unknown schedule {schedule!r}")
    cfg = RunConfig(
        schema=schema,
        privacy=privacy,
        puma_to_state={str(k): str(v) for k, v in raw.get("puma_to_state", {}).items()},
        iterations=iterations,
        edge_threshold=float(sel.get("edge_threshold", DEFAULT_EDGE_THRESHOLD)),
        independence_threshold=float(sel.get("independence_threshold", DEFAULT_INDEPENDENCE_THRESHOLD)),
        max_marginal_cells=int(sel.get("max_marginal_cells", DEFAULT_MAX_MARGINAL_CELLS)),
        paths=paths,
        seed=int(raw.get("seed", 0)),
        support_restriction=bool(raw.get("support_restriction", True)),
        schedule=schedule,
        repetitions=int(ev.get("repetitions", 50)),
        eval_seed=int(ev.get("seed", 0)),
        bias_threshold=int(ev.get("bias_threshold", 250)),
        puma_column=cols.get("puma", "PUMA"),
        year_column=cols.get("year", "YEAR"),
        raw=raw,
    )
    if cfg.repetitions < 1:
        raise ConfigError("evaluation.repetitions must be >= 1")
    for name in (cfg.puma_column, cfg.year_column):
        if name in schema.names:
            raise ConfigError(f"grouping column {name!r} must not be a schema attribute")
    return cfg


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, path.parent)


def load_csv(
    path: Path | str,
    schema: Schema,
    *,
    puma_column: str = "PUMA",
    year_column: str = "YEAR",
    states: Mapping[str, str] | None = None,
    strict: bool = True,
) -> GroupedData:
    """Read a CSV into per-(puma, year) histograms.

    Values are matched against labels first and then, for binned attributes,
    mapped through the bin edges.  In strict mode the first bad row raises
    :class:`IngestError`; otherwise bad rows are skipped and listed in
    ``GroupedData.issues`` as ``(line, message)``.
    """
    path = Path(path)
    cells: dict[tuple, list[int]] = {}
    issues = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (puma_column, year_column, *schema.names) if c not in header]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        for rec in reader:
            line = reader.line_num
            try:
                year_raw = rec[year_column]
                try:
                    year = int(year_raw)
                except (TypeError, ValueError):
                    raise DomainError(f"year {year_raw!r} is not an integer") from None
                puma = rec[puma_column]
                if puma is None or puma == "":
                    raise DomainError("empty puma")
                cell = schema.encode_cell([rec[n] for n in schema.names])
            except DomainError as exc:
                if strict:
                    raise IngestError(f"{path}: {exc}", row=line) from exc
                issues.append((line, str(exc)))
                log.warning("%s line %d skipped: %s", path, line, exc)
                continue
            cells.setdefault((puma, year), []).append(cell)
    groups = {key: Histogram.from_cells(schema, vals) for key, vals in cells.items()}
    return GroupedData(schema, groups, dict(states or {}), issues)


def write_csv(path: Path | str, data: GroupedData, *, puma_column: str = "PUMA",
              year_column: str = "YEAR") -> None:
    """Write one row per record, groups in key order and cells in index order."""
    schema = data.schema
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([puma_column, year_column, *schema.names])
        for puma, year in data.keys():
            hist = data.groups[(puma, year)]
            codes = schema.decode_codes(hist.cells)
            for row, count in zip(codes, hist.counts):
                labels = [attr.labels[c] for attr, c in zip(schema.attributes, row)]
                for _ in range(int(count)):
                    writer.writerow([puma, year, *labels])


def read_workload(path: Path | str, schema: Schema) -> Workload:
    """Workload file: a JSON list of attribute-name lists, one per marginal."""
    path = Path(path)
    try:
        names = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read workload {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"workload {path} is not valid JSON: {exc}") from exc
    if not isinstance(names, list) or not all(isinstance(q, list) for q in names):
        raise ConfigError(f"workload {path} must be a list of attribute-name lists")
    return Workload.from_names(schema, names)


def write_workload(path: Path | str, workload: Workload, schema: Schema) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(workload.to_names(schema), indent=2) + "\n", encoding="utf-8")


def write_json(path: Path | str, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path | str) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
