"""Command-line interface: estimate, contrast, simulate, probcheck.

Exit codes: 0 success (and, for estimate, every validity condition met);
1 data or configuration error; 2 usage error; 4 at least one validity
condition failed (the numeric output is still produced).

All output is deterministic for fixed inputs and seeds: JSON is key-sorted
with round-trippable floats, and nothing emits timestamps.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _stringio
import json
import sys
from pathlib import Path

import numpy as np

from . import io as pkgio
from .contrast import attributable_contrast, attributable_contrast_from_counts, exposure_attributable_contrast
from .design import ExposureMapping, build_knn_neighborhoods, evaluate_exposure
from .errors import InterfereError, ValidationError
from .exposure import enumerated_profile, exact_profile, monte_carlo_profile
from .monotone import bonferroni_scan, upper_confidence_bound
from .simulate import Scenario, run_coverage_experiment, synthetic_layout

CONDITION_FAILED_EXIT = 4


def _write_or_print(text: str, out_dir, filename: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
    else:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / filename).write_text(text)


def _mapping_from_config(config: pkgio.RunConfig) -> ExposureMapping:
    if config.mapping_kind == "product":
        return ExposureMapping.product()
    return ExposureMapping.threshold(config.d_min)


def _profile_for(config: pkgio.RunConfig, nbhd, seed_override=None):
    mapping = _mapping_from_config(config)
    if config.p_method == "mc":
        seed = config.mc_seed if seed_override is None else seed_override
        return mapping, monte_carlo_profile(nbhd, mapping, config.rho, config.mc_samples, seed)
    return mapping, exact_profile(nbhd, mapping, config.rho)


def _dump_matrices(profile, out_dir) -> None:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    np.savetxt(path / "joint.csv", profile.joint, delimiter=",")
    np.savetxt(path / "excess.csv", profile.excess, delimiter=",")
    np.savetxt(path / "centered.csv", profile.centered, delimiter=",")


def _estimate_text(reports, bonferroni, alpha) -> str:
    lines = [
        f"upper confidence bounds on the full-treatment mean outcome "
        f"(nominal alpha={alpha}, bonferroni={'yes' if bonferroni else 'no'})",
        f"{'d_min':>5} {'d':>3} {'alpha_eff':>10} {'estimate':>10} {'upper':>10} "
        f"{'condition':>9} {'n_eff':>5} {'p':>8} {'min_joint':>10} {'overlap':>7}",
    ]
    for r in reports:
        lines.append(
            f"{r.d_min if r.d_min is not None else '-':>5} "
            f"{r.d if r.d is not None else '-':>3} {r.alpha:>10.5f} "
            f"{r.estimate:>10.4f} {r.upper_bound:>10.4f} "
            f"{'met' if r.condition_ok else 'FAILED':>9} {r.n_effective:>5} "
            f"{r.p:>8.4f} {r.min_joint:>10.3g} {r.overlap_degree:>7}"
        )
        lines.append(f"      interval: [0, {r.upper_bound:.6g}]")
        if not r.condition_ok:
            lines.append(
                "      warning: validity condition failed; the bound is reported "
                "for diagnostics but its coverage guarantee does not apply"
            )
        if r.d == 1:
            lines.append("      note: singleton neighborhoods; spatial information is not used")
    return "\n".join(lines) + "\n"


def _reports_csv(reports) -> str:
    buffer = _stringio.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    fields = (
        "d_min", "d", "alpha", "estimate", "variance", "upper_bound",
        "condition_ok", "n_effective", "p", "min_joint", "overlap_degree", "fallback_ok",
    )
    writer.writerow(fields)
    for r in reports:
        writer.writerow([getattr(r, f) for f in fields])
    return buffer.getvalue()


def cmd_estimate(args) -> int:
    config = pkgio.load_run_config(args.config)
    if args.alpha is not None:
        config = dataclasses.replace(config, alpha=args.alpha)
    pop = pkgio.load_units(args.data, config.rho)
    bonferroni = bool(config.bonferroni)
    if bonferroni:
        if args.neighborhoods is not None:
            raise ValidationError("--neighborhoods cannot be combined with a bonferroni scan")
        if config.p_method == "mc":
            raise ValidationError("Monte Carlo p_method is not supported in bonferroni scans")
        reports = bonferroni_scan(pop, config.bonferroni, config.alpha, config.variance_floor)
    else:
        if config.mapping_kind is None:
            raise ValidationError("estimate needs config.mapping (or a bonferroni list)")
        if args.neighborhoods is not None:
            nbhd = pkgio.load_neighborhoods(args.neighborhoods)
            if nbhd.n != pop.n:
                raise ValidationError("neighborhood file and unit table differ in unit count")
        elif config.d is not None:
            nbhd = build_knn_neighborhoods(pop, config.d)
        else:
            raise ValidationError("estimate needs config.neighborhood or --neighborhoods")
        mapping, profile = _profile_for(config, nbhd, args.seed)
        exposure = evaluate_exposure(pop, nbhd, mapping)
        report = upper_confidence_bound(pop, exposure, profile, config.alpha, config.variance_floor)
        reports = [dataclasses.replace(report, d_min=config.d_min, d=config.d)]
        if args.dump_matrices and args.out:
            _dump_matrices(profile, args.out)
    payload = {
        "command": "estimate",
        "alpha": config.alpha,
        "bonferroni": bonferroni,
        "n_units": pop.n,
        "configs": [pkgio.monotone_report_dict(r) for r in reports],
        "all_conditions_met": all(r.condition_ok for r in reports),
    }
    for entry in payload["configs"]:
        if entry["d"] == 1:
            entry["note"] = "singleton neighborhoods; spatial information is not used"
    if args.format == "json":
        _write_or_print(pkgio.dump_json(payload), args.out, "estimate.json")
    elif args.format == "csv":
        _write_or_print(_reports_csv(reports), args.out, "estimate.csv")
    else:
        _write_or_print(_estimate_text(reports, bonferroni, config.alpha), args.out, "estimate.txt")
    return 0 if payload["all_conditions_met"] else CONDITION_FAILED_EXIT


def _contrast_text(payload) -> str:
    lines = []
    for key in ("treatment_split", "exposure_split"):
        block = payload.get(key)
        if block is None:
            continue
        lines.append(f"{key.replace('_', ' ')} attributable contrast (alpha={block['alpha']})")
        lines.append(f"  delta:            {block['delta']:.6g}")
        lines.append(f"  one-sided lower:  {block['one_sided_lower']:.6g}")
        lines.append(f"  two-sided:        [{block['two_sided'][0]:.6g}, {block['two_sided'][1]:.6g}]")
        lines.append(f"  group sizes:      {block['n_exposed']} exposed / {block['n_unexposed']} unexposed")
        if block.get("lambda_1") is not None:
            lines.append(f"  lambda_1:         {block['lambda_1']:.6g}")
        lines.append(f"  assumptions:      {block['assumptions']}")
    return "\n".join(lines) + "\n"


def cmd_contrast(args) -> int:
    alpha = args.alpha if args.alpha is not None else 0.05
    config = None
    if args.config is not None:
        config = pkgio.load_run_config(args.config)
        if args.alpha is None:
            alpha = config.alpha
    payload = {"command": "contrast", "alpha": alpha}
    if args.count_mode:
        counts = pkgio.load_count_table(args.data)
        report = attributable_contrast_from_counts(alpha=alpha, **counts)
        payload["treatment_split"] = pkgio.contrast_report_dict(report)
    else:
        pop = pkgio.load_units(args.data, config.rho if config else 0.5)
        report = attributable_contrast(pop.treatment, pop.outcome, alpha)
        payload["treatment_split"] = pkgio.contrast_report_dict(report)
        if config is not None and config.d is not None and config.mapping_kind is not None:
            nbhd = build_knn_neighborhoods(pop, config.d)
            mapping, profile = _profile_for(config, nbhd, args.seed)
            exposure = evaluate_exposure(pop, nbhd, mapping)
            zreport = exposure_attributable_contrast(pop.outcome, exposure, profile, alpha)
            payload["exposure_split"] = pkgio.contrast_report_dict(zreport)
    if args.format == "csv":
        buffer = _stringio.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("split", "delta", "one_sided_lower", "two_sided_low", "two_sided_high", "alpha"))
        for key in ("treatment_split", "exposure_split"):
            if key in payload:
                block = payload[key]
                writer.writerow(
                    (key, block["delta"], block["one_sided_lower"],
                     block["two_sided"][0], block["two_sided"][1], block["alpha"])
                )
        _write_or_print(buffer.getvalue(), args.out, "contrast.csv")
    elif args.format == "text":
        _write_or_print(_contrast_text(payload), args.out, "contrast.txt")
    else:
        _write_or_print(pkgio.dump_json(payload), args.out, "contrast.json")
    return 0


def cmd_simulate(args) -> int:
    config = pkgio.load_sim_config(args.config)
    seed = args.seed if args.seed is not None else config.seed
    layout = synthetic_layout(config.layout_kind, config.n, config.layout_seed)
    scenario = Scenario(
        kind=config.scenario,
        layout=layout,
        rho=config.rho,
        seed=seed,
        count_mean=config.count_mean,
        count_dispersion=config.count_dispersion,
        spillover_max=config.spillover_max,
    )
    table = run_coverage_experiment(scenario, config.configs, config.alpha, config.replicates)
    metadata = {
        "layout": {"kind": config.layout_kind, "n": config.n, "seed": config.layout_seed},
        "seed": seed,
    }
    if config.layout_kind == "two_cluster":
        south = int((layout[:, -1] <= np.median(layout[:, -1])).sum())
        metadata["layout"]["south_north_split"] = [south, config.n - south]
    payload = dict(pkgio.coverage_table_dict(table), metadata=metadata)
    if args.out is not None:
        _write_or_print(table.to_csv(), args.out, "coverage.csv")
        _write_or_print(table.to_text(), args.out, "coverage.txt")
        _write_or_print(pkgio.dump_json(payload), args.out, "coverage.json")
    if args.format == "csv":
        sys.stdout.write(table.to_csv())
    elif args.format == "json":
        sys.stdout.write(pkgio.dump_json(payload))
    else:
        sys.stdout.write(table.to_text())
    return 0


def cmd_probcheck(args) -> int:
    config = pkgio.load_run_config(args.config)
    pop = pkgio.load_units(args.data, config.rho)
    if config.d is None or config.mapping_kind is None:
        raise ValidationError("probcheck needs config.mapping and config.neighborhood")
    nbhd = build_knn_neighborhoods(pop, config.d)
    mapping = _mapping_from_config(config)
    exact = exact_profile(nbhd, mapping, config.rho)
    payload = {
        "command": "probcheck",
        "n_units": pop.n,
        "p_exact": exact.p,
        "min_joint": exact.min_joint,
        "overlap_degree": exact.overlap_degree,
        "oracle": None,
        "mc": None,
    }
    if args.oracle:
        if pop.n > 20:
            raise ValidationError(f"full-enumeration oracle supports at most 20 units, got {pop.n}")
        oracle = enumerated_profile(nbhd, mapping, config.rho)
        payload["oracle"] = {
            "max_abs_diff_joint": float(np.abs(exact.joint - oracle.joint).max()),
            "abs_diff_p": abs(exact.p - oracle.p),
        }
    if config.p_method == "mc":
        seed = args.seed if args.seed is not None else config.mc_seed
        mc = monte_carlo_profile(nbhd, mapping, config.rho, config.mc_samples, seed)
        diff = np.abs(mc.joint - exact.joint)
        se = np.sqrt(exact.joint * (1.0 - exact.joint) / config.mc_samples)
        positive = se > 0
        payload["mc"] = {
            "samples": config.mc_samples,
            "seed": seed,
            "max_abs_diff_joint": float(diff.max()),
            "max_se_ratio": float((diff[positive] / se[positive]).max()) if positive.any() else 0.0,
            "n_entries": int(diff.size),
            "n_within_4se": int((diff[positive] <= 4.0 * se[positive]).sum() + (~positive).sum()),
        }
    if args.dump_matrices and args.out:
        _dump_matrices(exact, args.out)
    if args.format == "text":
        lines = [f"exposure probability check: n={pop.n}, p={exact.p!r}"]
        if payload["oracle"] is not None:
            lines.append(
                f"  enumeration oracle: max |joint diff| = {payload['oracle']['max_abs_diff_joint']:.3e}"
            )
        if payload["mc"] is not None:
            mc_block = payload["mc"]
            lines.append(
                f"  monte carlo ({mc_block['samples']} samples): max |joint diff| = "
                f"{mc_block['max_abs_diff_joint']:.3e}, max diff/SE = {mc_block['max_se_ratio']:.2f}, "
                f"{mc_block['n_within_4se']}/{mc_block['n_entries']} entries within 4 SE"
            )
        _write_or_print("\n".join(lines) + "\n", args.out, "probcheck.txt")
    else:
        _write_or_print(pkgio.dump_json(payload), args.out, "probcheck.json")
    return 0


def _add_common(parser, *, data=True):
    parser.add_argument("--config", required=True, help="JSON configuration file")
    if data:
        parser.add_argument("--data", required=True, help="unit table CSV")
    parser.add_argument("--out", default=None, help="directory for output files (default: stdout)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--alpha", type=float, default=None, help="significance level override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interfere",
        description="Design-based confidence bounds for experiments under network interference",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="upper bounds on the full-treatment mean outcome")
    _add_common(p_est)
    p_est.add_argument("--neighborhoods", default=None, help="explicit adjacency JSON instead of k-NN")
    p_est.add_argument("--format", choices=("json", "text", "csv"), default="json")
    p_est.add_argument("--dump-matrices", action="store_true", help="write joint/excess matrices as CSV")
    p_est.set_defaults(func=cmd_estimate)

    p_con = sub.add_parser("contrast", help="attributable-contrast intervals (binary outcomes)")
    p_con.add_argument("--config", default=None, help="JSON configuration file")
    p_con.add_argument("--data", required=True, help="unit table CSV, or count table with --count-mode")
    p_con.add_argument("--count-mode", action="store_true", help="data is an aggregate two-arm count table")
    p_con.add_argument("--out", default=None)
    p_con.add_argument("--seed", type=int, default=None)
    p_con.add_argument("--alpha", type=float, default=None)
    p_con.add_argument("--format", choices=("json", "text", "csv"), default="json")
    p_con.set_defaults(func=cmd_contrast)

    p_sim = sub.add_parser("simulate", help="coverage and condition-met tables")
    p_sim.add_argument("--config", required=True, help="JSON simulation configuration")
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--format", choices=("json", "text", "csv"), default="text")
    p_sim.set_defaults(func=cmd_simulate)

    p_prob = sub.add_parser("probcheck", help="exposure probability diagnostics")
    _add_common(p_prob)
    p_prob.add_argument("--oracle", action="store_true", help="compare against full enumeration (n <= 20)")
    p_prob.add_argument("--format", choices=("json", "text"), default="json")
    p_prob.add_argument("--dump-matrices", action="store_true")
    p_prob.set_defaults(func=cmd_probcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        try:
            config = pkgio.load_sim_config(args.config)
        except (OSError, ValueError, InterfereError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if config.replicates < 1:
            parser.error("simulate: replicates must be at least 1")
    try:
        return args.func(args)
    except (InterfereError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
