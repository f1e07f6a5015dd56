"""Randomization distribution of the effective-treatment vector.

Given neighborhoods, a mapping, and the treatment probability, this module
computes the shared marginal exposure probability p and the matrix of
pairwise joint probabilities J[i, j] = P(Z_i = Z_j = 1), either exactly or by
Monte Carlo, plus the derived matrices used by the variance estimators:

    excess   = J - p(1-p) I - p^2 11'      (deviation from independence)
    centered = (I - 11'/n) excess (I - 11'/n)

The exact pairwise computation partitions the union of two neighborhoods into
the two private parts and the shared part and convolves binomial counts over
the three regions, so cost per pair is O(k^2) rather than O(2^|union|). A
full-enumeration oracle (n <= 20) is provided for testing and diagnostics.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import ExposureMapping, NeighborhoodSet, evaluate_exposure_many, _check_mapping
from .errors import ValidationError

_MC_SHARD = 1 << 16


def worker_count() -> int:
    """Worker cap from the INTERFERE_THREADS environment variable (default 1)."""
    raw = os.environ.get("INTERFERE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"INTERFERE_THREADS must be an integer, got {raw!r}")
    return max(1, value)


@dataclass(frozen=True)
class ExposureProfile:
    """Second-order randomization quantities of the exposure vector."""

    p: float                    # shared marginal P(Z_i = 1)
    joint: np.ndarray           # (n, n) symmetric, J[i, j] = P(Z_i Z_j = 1)
    excess: np.ndarray          # J minus the independent-Bernoulli second moment
    centered: np.ndarray        # doubly centered excess; all row/col sums are 0
    min_joint: float            # smallest off-diagonal joint probability
    overlap_degree: int         # max number of other neighborhoods meeting any set
    method: str                 # "exact" | "monte_carlo" | "enumeration"
    num_samples: Optional[int] = None

    @property
    def n(self) -> int:
        return self.joint.shape[0]


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Constants behind the asymptotic guarantees, supplied by the analyst.

    ``outcome_bound`` bounds the counterfactual outcomes, ``overlap_cap`` the
    allowed neighborhood overlap degree, and ``variance_floor`` the assumed
    lower bound on Var(T)/n.
    """

    outcome_bound: float
    overlap_cap: int
    variance_floor: float

    def __post_init__(self):
        if not self.outcome_bound > 0:
            raise ValidationError("outcome_bound must be positive")
        if not self.variance_floor > 0:
            raise ValidationError("variance_floor must be positive")


def _binom_pmf_table(k: int, rho: float) -> list:
    """pmf[n][m] = P(Binomial(n, rho) = m) for all n in 0..k."""
    tables = []
    for n in range(k + 1):
        row = np.array(
            [math.comb(n, m) * rho**m * (1.0 - rho) ** (n - m) for m in range(n + 1)]
        )
        tables.append(row)
    return tables


def _binom_sf_table(pmf: list) -> list:
    """sf[n][t] = P(Binomial(n, rho) >= t) for t in 0..n+1."""
    tables = []
    for row in pmf:
        sf = np.zeros(len(row) + 1)
        sf[:-1] = row[::-1].cumsum()[::-1]
        tables.append(sf)
    return tables


def _sf(sf_tables: list, n: int, t: int) -> float:
    if t <= 0:
        return 1.0
    if t > n:
        return 0.0
    return float(sf_tables[n][t])


def exact_marginal(nbhd: NeighborhoodSet, mapping: ExposureMapping, rho: float) -> float:
    """Closed-form P(Z_i = 1), identical across units by size uniformity."""
    _check_mapping(nbhd, mapping)
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"treatment probability must lie in (0, 1), got {rho}")
    k = nbhd.k
    if mapping.kind == "product":
        return rho**k
    pmf = _binom_pmf_table(k, rho)
    sf = _binom_sf_table(pmf)
    return rho * _sf(sf, k - 1, mapping.d_min - 1)


def _overlapping_pairs(nbhd: NeighborhoodSet) -> set:
    owners = {}
    for i, row in enumerate(nbhd.members):
        for u in row:
            owners.setdefault(int(u), []).append(i)
    pairs = set()
    for group in owners.values():
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                pairs.add((group[a], group[b]))
    return pairs


def overlap_degree(nbhd: NeighborhoodSet) -> int:
    """Maximum, over units, of the number of other neighborhoods meeting its set."""
    counts = np.zeros(nbhd.n, dtype=np.int64)
    for i, j in _overlapping_pairs(nbhd):
        counts[i] += 1
        counts[j] += 1
    return int(counts.max(initial=0))


def center_excess(joint: np.ndarray, p: float) -> tuple:
    """Excess over the independent second moment, and its doubly centered form."""
    joint = np.asarray(joint, dtype=float)
    n = joint.shape[0]
    if joint.ndim != 2 or joint.shape[1] != n:
        raise ValidationError("joint probability matrix must be square")
    if not np.allclose(joint, joint.T, rtol=0.0, atol=1e-12):
        raise ValidationError("joint probability matrix must be symmetric")
    excess = joint - p * (1.0 - p) * np.eye(n) - p * p * np.ones((n, n))
    proj = np.eye(n) - np.ones((n, n)) / n
    centered = proj @ excess @ proj
    return excess, centered


def _finalize(joint, p, nbhd, method, num_samples=None) -> ExposureProfile:
    joint = np.asarray(joint, dtype=float)
    excess, centered = center_excess(joint, p)
    n = joint.shape[0]
    if n > 1:
        off = joint[~np.eye(n, dtype=bool)]
        min_joint = float(off.min())
    else:
        min_joint = float(p)
    for arr in (joint, excess, centered):
        arr.setflags(write=False)
    return ExposureProfile(
        p=float(p),
        joint=joint,
        excess=excess,
        centered=centered,
        min_joint=min_joint,
        overlap_degree=overlap_degree(nbhd),
        method=method,
        num_samples=num_samples,
    )


def _pair_joint_threshold(set_i, set_j, i, j, d_min, rho, pmf, sf) -> float:
    # Condition on X_i = X_j = 1 and convolve the three disjoint regions.
    base_i = 1 + (1 if j in set_i else 0)
    base_j = 1 + (1 if i in set_j else 0)
    pair = {i, j}
    shared = (set_i & set_j) - pair
    only_i = set_i - set_j - pair
    only_j = set_j - set_i - pair
    a, b, c = len(only_i), len(only_j), len(shared)
    total = 0.0
    pmf_c = pmf[c]
    for m in range(c + 1):
        total += (
            pmf_c[m]
            * _sf(sf, a, d_min - base_i - m)
            * _sf(sf, b, d_min - base_j - m)
        )
    return rho * rho * total


def exact_profile(nbhd: NeighborhoodSet, mapping: ExposureMapping, rho: float) -> ExposureProfile:
    """Exact joint exposure probabilities for every pair of units.

    Pairs with disjoint neighborhoods are independent, so their joint
    probability is p^2; only overlapping pairs need the region convolution.
    """
    p = exact_marginal(nbhd, mapping, rho)
    n = nbhd.n
    joint = np.full((n, n), p * p)
    np.fill_diagonal(joint, p)
    sets = nbhd.as_sets()
    if mapping.kind == "product":
        for i, j in _overlapping_pairs(nbhd):
            joint[i, j] = joint[j, i] = rho ** len(sets[i] | sets[j])
    else:
        pmf = _binom_pmf_table(nbhd.k, rho)
        sf = _binom_sf_table(pmf)
        for i, j in _overlapping_pairs(nbhd):
            value = _pair_joint_threshold(sets[i], sets[j], i, j, mapping.d_min, rho, pmf, sf)
            joint[i, j] = joint[j, i] = value
    return _finalize(joint, p, nbhd, "exact")


def _mc_shard_counts(nbhd, mapping, rho, seed, shard, shard_n):
    rng = np.random.Generator(np.random.Philox(key=[seed, shard]))
    x = (rng.random((shard_n, nbhd.n)) < rho).astype(np.int8)
    z = evaluate_exposure_many(x, nbhd, mapping).astype(float)
    return z.T @ z


def monte_carlo_profile(
    nbhd: NeighborhoodSet,
    mapping: ExposureMapping,
    rho: float,
    num_samples: int,
    seed: int = 0,
) -> ExposureProfile:
    """Empirical joint exposure frequencies over independent assignment draws.

    Sampling uses a counter-based generator keyed by (seed, shard index), so
    results are bit-identical for a given seed regardless of how many worker
    threads run the shards.
    """
    _check_mapping(nbhd, mapping)
    num_samples = int(num_samples)
    if num_samples < 1:
        raise ValidationError("num_samples must be at least 1")
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"treatment probability must lie in (0, 1), got {rho}")
    shard_sizes = []
    remaining = num_samples
    while remaining > 0:
        take = min(_MC_SHARD, remaining)
        shard_sizes.append(take)
        remaining -= take
    workers = worker_count()
    if workers > 1 and len(shard_sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda args: _mc_shard_counts(nbhd, mapping, rho, seed, *args),
                    enumerate(shard_sizes),
                )
            )
    else:
        parts = [
            _mc_shard_counts(nbhd, mapping, rho, seed, shard, shard_n)
            for shard, shard_n in enumerate(shard_sizes)
        ]
    counts = parts[0]
    for part in parts[1:]:
        counts = counts + part
    joint = counts / num_samples
    p = float(np.diagonal(joint).mean())
    return _finalize(joint, p, nbhd, "monte_carlo", num_samples=num_samples)


def enumerated_profile(nbhd: NeighborhoodSet, mapping: ExposureMapping, rho: float) -> ExposureProfile:
    """Exact profile by enumerating all 2^n assignments (test oracle, n <= 20)."""
    _check_mapping(nbhd, mapping)
    n = nbhd.n
    if n > 20:
        raise ValidationError(f"full enumeration supports at most 20 units, got {n}")
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"treatment probability must lie in (0, 1), got {rho}")
    total = 1 << n
    x = ((np.arange(total)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)
    treated = x.sum(axis=1)
    weights = rho ** treated.astype(float) * (1.0 - rho) ** (n - treated).astype(float)
    z = evaluate_exposure_many(x, nbhd, mapping).astype(float)
    marginals = weights @ z
    spread = float(marginals.max() - marginals.min())
    if spread > 1e-9:
        raise ValidationError(
            f"marginal exposure probabilities are not uniform (spread {spread:.3g}); "
            "all neighborhoods must give units the same exposure probability"
        )
    joint = z.T @ (weights[:, None] * z)
    joint = (joint + joint.T) / 2.0
    return _finalize(joint, float(marginals.mean()), nbhd, "enumeration")
