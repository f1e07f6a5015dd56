#!/usr/bin/env python3
"""Attributable-contrast examples.

First, the large online voting experiment as an aggregate count table
(611K/109K control, 60M/12M treated): the attributable contrast is pinned
near 2% with no assumptions on the interference. Second, a synthetic
exposure-split interval on a small spatial design, plus an empirical check
that the full-control contrast respects its concentration bound.
"""

import argparse

import numpy as np

import interfere as itf


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--draws", type=int, default=2000)
    args = parser.parse_args()

    report = itf.attributable_contrast_from_counts(
        n_treated=60_000_000,
        pos_treated=12_000_000,
        n_control=611_000,
        pos_control=109_000,
        alpha=args.alpha,
    )
    print("voting experiment, treatment split:")
    print(f"  delta = {report.delta:.4%}")
    print(f"  two-sided: [{report.two_sided[0]:.4%}, {report.two_sided[1]:.4%}]")
    print(f"  one-sided lower: {report.one_sided_lower:.4%}")

    n = 200
    layout = itf.synthetic_layout("uniform_square", n, seed=5)
    nbhd = itf.build_knn_neighborhoods(layout, 3)
    mapping = itf.ExposureMapping.threshold(2)
    profile = itf.exact_profile(nbhd, mapping, 0.5)
    gen = np.random.default_rng(args.seed)
    x = (gen.random(n) < 0.5).astype(np.int8)
    y = (gen.random(n) < 0.3 + 0.2 * x).astype(int)
    exposure = itf.evaluate_exposure(x, nbhd, mapping)
    zreport = itf.exposure_attributable_contrast(y, exposure, profile, args.alpha)
    print()
    print(f"synthetic exposure split (n={n}, threshold d_min=2, d=3):")
    print(f"  delta = {zreport.delta:.4f}, lambda_1 = {zreport.lambda_1:.4f}")
    print(f"  two-sided: [{zreport.two_sided[0]:.4f}, {zreport.two_sided[1]:.4f}]")

    xi = (gen.random(n) < 0.5).astype(int)
    summary = itf.concentration_check(xi, args.draws, (nbhd, mapping, 0.5), alpha=args.alpha, seed=args.seed)
    print()
    print(
        f"full-control contrast exceedance over {summary.num_valid} draws: "
        f"{summary.exceed_fraction:.4f} (bound {summary.bound:.4f}, "
        f"nominal <= {args.alpha})"
    )


if __name__ == "__main__":
    main()
