"""Data ingestion and configuration parsing for the command-line surface.

Unit tables are CSV with header columns ``id``, coordinates (``x``/``y``, or
``x1..xk``, or a single ``x``), ``treatment``, ``outcome``, and optionally
``enrollment``. Run configurations are JSON documents validated strictly:
unknown keys are rejected so typos fail loudly instead of being ignored.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .contrast import ContrastReport
from .design import NeighborhoodSet, Population
from .errors import ValidationError
from .monotone import MonotoneCiReport
from .simulate import LAYOUT_KINDS, SCENARIO_KINDS
from .simulate import CoverageTable


def _coordinate_columns(fieldnames) -> list:
    names = set(fieldnames)
    if {"x", "y"} <= names:
        return ["x", "y"]
    numbered = sorted(
        (int(match.group(1)), name)
        for name in names
        if (match := re.fullmatch(r"x(\d+)", name))
    )
    if numbered:
        expected = list(range(1, len(numbered) + 1))
        if [k for k, _ in numbered] != expected:
            raise ValidationError(
                f"coordinate columns must be consecutive x1..xk, got {[n for _, n in numbered]}"
            )
        return [name for _, name in numbered]
    if "x" in names:
        return ["x"]
    raise ValidationError("no coordinate columns found (expected x/y, x1..xk, or x)")


def _parse_float(raw: str, row: int, column: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"row {row}: column {column!r} is not a number: {raw!r}")


def load_units(path, rho: float) -> Population:
    """Read a unit table; row order becomes unit index order."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty file")
        fields = [name.strip() for name in reader.fieldnames]
        for required in ("id", "treatment", "outcome"):
            if required not in fields:
                raise ValidationError(f"{path}: missing required column {required!r}")
        coord_cols = _coordinate_columns(fields)
        has_enrollment = "enrollment" in fields
        ids, coords, treatment, outcome, enrollment = [], [], [], [], []
        for row_number, record in enumerate(reader, start=2):
            ids.append(record["id"])
            coords.append([_parse_float(record[c], row_number, c) for c in coord_cols])
            raw_treatment = (record["treatment"] or "").strip()
            if raw_treatment not in ("0", "1"):
                raise ValidationError(
                    f"row {row_number}: column 'treatment' must be 0 or 1, got {raw_treatment!r}"
                )
            treatment.append(int(raw_treatment))
            outcome.append(_parse_float(record["outcome"], row_number, "outcome"))
            if outcome[-1] < 0:
                raise ValidationError(f"row {row_number}: column 'outcome' must be nonnegative")
            if has_enrollment:
                enrollment.append(_parse_float(record["enrollment"], row_number, "enrollment"))
                if outcome[-1] > enrollment[-1]:
                    raise ValidationError(
                        f"row {row_number}: outcome {outcome[-1]} exceeds enrollment "
                        f"{enrollment[-1]} (enrollment must upper-bound the outcome)"
                    )
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: unit ids must be unique")
    return Population(
        ids=tuple(ids),
        coords=np.array(coords, dtype=float),
        treatment=np.array(treatment),
        outcome=np.array(outcome, dtype=float),
        rho=rho,
        enrollment=np.array(enrollment, dtype=float) if has_enrollment else None,
    )


def load_neighborhoods(path) -> NeighborhoodSet:
    """Explicit adjacency-list loader: a JSON list of per-unit index lists."""
    path = Path(path)
    with path.open() as handle:
        data = json.load(handle)
    if not isinstance(data, list) or not all(isinstance(row, list) for row in data):
        raise ValidationError(f"{path}: expected a JSON list of index lists")
    return NeighborhoodSet.from_sets(data)


def load_count_table(path) -> dict:
    """Aggregate two-arm count table: columns arm, total, positive.

    ``arm`` must be exactly 'control' and 'treated', one row each.
    """
    path = Path(path)
    rows = {}
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"arm", "total", "positive"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: count table needs columns arm, total, positive")
        for row_number, record in enumerate(reader, start=2):
            arm = (record["arm"] or "").strip()
            if arm not in ("control", "treated"):
                raise ValidationError(f"row {row_number}: arm must be 'control' or 'treated', got {arm!r}")
            if arm in rows:
                raise ValidationError(f"row {row_number}: duplicate arm {arm!r}")
            total = int(_parse_float(record["total"], row_number, "total"))
            positive = int(_parse_float(record["positive"], row_number, "positive"))
            rows[arm] = (total, positive)
    if set(rows) != {"control", "treated"}:
        raise ValidationError(f"{path}: count table needs exactly one control and one treated row")
    return {
        "n_treated": rows["treated"][0],
        "pos_treated": rows["treated"][1],
        "n_control": rows["control"][0],
        "pos_control": rows["control"][1],
    }


def _require_keys(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValidationError(f"{context}: unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")


@dataclass(frozen=True)
class RunConfig:
    """Validated analysis configuration."""

    rho: float
    alpha: float = 0.05
    mapping_kind: Optional[str] = None   # "product" | "threshold"
    d_min: Optional[int] = None
    d: Optional[int] = None
    bonferroni: Optional[tuple] = None   # ((d_min, d), ...)
    p_method: str = "exact"              # "exact" | "mc"
    mc_samples: Optional[int] = None
    mc_seed: int = 0
    variance_floor: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"config: rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"config: alpha must lie in (0, 1), got {self.alpha}")
        if self.p_method not in ("exact", "mc"):
            raise ValidationError(f"config: p_method must be 'exact' or 'mc', got {self.p_method!r}")
        if self.p_method == "mc" and (self.mc_samples is None or self.mc_samples < 1):
            raise ValidationError("config: Monte Carlo p_method needs samples >= 1")


def parse_run_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be a JSON object")
    _require_keys(
        data,
        {"rho", "alpha", "mapping", "neighborhood", "bonferroni", "p_method", "diagnostics"},
        "config",
    )
    if "rho" not in data:
        raise ValidationError("config: rho is required")
    mapping_kind = None
    d_min = None
    if "mapping" in data:
        mapping = data["mapping"]
        _require_keys(mapping, {"kind", "d_min"}, "config.mapping")
        mapping_kind = mapping.get("kind")
        if mapping_kind not in ("product", "threshold"):
            raise ValidationError(f"config.mapping: kind must be 'product' or 'threshold', got {mapping_kind!r}")
        if mapping_kind == "threshold":
            if "d_min" not in mapping:
                raise ValidationError("config.mapping: threshold mapping needs d_min")
            d_min = int(mapping["d_min"])
        elif "d_min" in mapping:
            raise ValidationError("config.mapping: product mapping takes no d_min")
    d = None
    if "neighborhood" in data:
        nbhd = data["neighborhood"]
        _require_keys(nbhd, {"d"}, "config.neighborhood")
        if "d" not in nbhd:
            raise ValidationError("config.neighborhood: d is required")
        d = int(nbhd["d"])
    bonferroni = None
    if "bonferroni" in data:
        pairs = data["bonferroni"]
        if not isinstance(pairs, list) or not pairs:
            raise ValidationError("config.bonferroni: expected a nonempty list of [d_min, d] pairs")
        parsed = []
        for entry in pairs:
            if not (isinstance(entry, list) and len(entry) == 2):
                raise ValidationError(f"config.bonferroni: entries must be [d_min, d] pairs, got {entry!r}")
            parsed.append((int(entry[0]), int(entry[1])))
        bonferroni = tuple(parsed)
    p_method = "exact"
    mc_samples = None
    mc_seed = 0
    if "p_method" in data:
        method = data["p_method"]
        if method == "exact":
            pass
        elif isinstance(method, dict):
            _require_keys(method, {"kind", "samples", "seed"}, "config.p_method")
            if method.get("kind") != "mc":
                raise ValidationError(f"config.p_method: kind must be 'mc', got {method.get('kind')!r}")
            p_method = "mc"
            mc_samples = int(method.get("samples", 0))
            mc_seed = int(method.get("seed", 0))
        else:
            raise ValidationError("config.p_method: expected 'exact' or an mc object")
    variance_floor = None
    if "diagnostics" in data:
        diag = data["diagnostics"]
        _require_keys(diag, {"c"}, "config.diagnostics")
        if "c" in diag:
            variance_floor = float(diag["c"])
            if not variance_floor > 0:
                raise ValidationError("config.diagnostics: c must be positive")
    return RunConfig(
        rho=float(data["rho"]),
        alpha=float(data.get("alpha", 0.05)),
        mapping_kind=mapping_kind,
        d_min=d_min,
        d=d,
        bonferroni=bonferroni,
        p_method=p_method,
        mc_samples=mc_samples,
        mc_seed=mc_seed,
        variance_floor=variance_floor,
    )


def load_run_config(path) -> RunConfig:
    with Path(path).open() as handle:
        return parse_run_config(json.load(handle))


@dataclass(frozen=True)
class SimConfig:
    """Validated simulation configuration."""

    scenario: str
    layout_kind: str
    n: int
    layout_seed: int
    rho: float
    alpha: float
    configs: tuple
    replicates: int
    seed: int
    count_mean: float = 10.0
    count_dispersion: float = 3.0
    spillover_max: float = 10.0


def parse_sim_config(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ValidationError("sim config: top level must be a JSON object")
    _require_keys(
        data,
        {"scenario", "layout", "rho", "alpha", "configs", "replicates", "seed", "params"},
        "sim config",
    )
    for required in ("scenario", "layout", "configs", "replicates"):
        if required not in data:
            raise ValidationError(f"sim config: {required} is required")
    if data["scenario"] not in SCENARIO_KINDS:
        raise ValidationError(
            f"sim config: scenario must be one of {list(SCENARIO_KINDS)}, got {data['scenario']!r}"
        )
    layout = data["layout"]
    _require_keys(layout, {"kind", "n", "seed"}, "sim config.layout")
    if layout.get("kind") not in LAYOUT_KINDS:
        raise ValidationError(f"sim config.layout: kind must be one of {list(LAYOUT_KINDS)}")
    if "n" not in layout:
        raise ValidationError("sim config.layout: n is required")
    configs = []
    for entry in data["configs"]:
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ValidationError(f"sim config: configs entries must be [d_min, d] pairs, got {entry!r}")
        configs.append((int(entry[0]), int(entry[1])))
    if not configs:
        raise ValidationError("sim config: at least one [d_min, d] configuration is required")
    params = data.get("params", {})
    _require_keys(params, {"count_mean", "count_dispersion", "spillover_max"}, "sim config.params")
    return SimConfig(
        scenario=data["scenario"],
        layout_kind=layout["kind"],
        n=int(layout["n"]),
        layout_seed=int(layout.get("seed", 0)),
        rho=float(data.get("rho", 0.5)),
        alpha=float(data.get("alpha", 0.05)),
        configs=tuple(configs),
        replicates=int(data["replicates"]),
        seed=int(data.get("seed", 0)),
        count_mean=float(params.get("count_mean", 10.0)),
        count_dispersion=float(params.get("count_dispersion", 3.0)),
        spillover_max=float(params.get("spillover_max", 10.0)),
    )


def load_sim_config(path) -> SimConfig:
    with Path(path).open() as handle:
        return parse_sim_config(json.load(handle))


def monotone_report_dict(report: MonotoneCiReport) -> dict:
    data = dataclasses.asdict(report)
    data["interval"] = [0.0, report.upper_bound]
    return data


def contrast_report_dict(report: ContrastReport) -> dict:
    data = dataclasses.asdict(report)
    data["two_sided"] = list(report.two_sided)
    return data


def coverage_table_dict(table: CoverageTable) -> dict:
    data = dataclasses.asdict(table)
    data["rows"] = [dataclasses.asdict(row) for row in table.rows]
    return data


def dump_json(payload) -> str:
    """Deterministic JSON rendering; floats round-trip exactly."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
