"""Confidence upper bounds on the mean outcome under full treatment.

The estimand is the average counterfactual outcome had every unit been
treated. Under the monotonicity assumption (full treatment never increases
any outcome: 0 <= theta_i <= Y_i, the analyst's responsibility and not
testable from data) the observed outcomes of effectively treated units yield
a computable, conservative one-sided bound:

    upper = estimate + z_{1-alpha} * sqrt(variance) / count

where ``estimate`` averages Y over effectively treated units and ``variance``
is a conservative estimate of Var(count * (estimate - estimand)). The bound
inherits its validity from a normal approximation, and dominating the
unobservable idealized bound additionally requires a computable condition on
the estimate-to-spread ratio (``validity_condition``); reports carry the
condition flag rather than hiding failures, because ignoring it is known to
produce under-coverage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .design import (
    EffectiveTreatment,
    ExposureMapping,
    Population,
    build_knn_neighborhoods,
    evaluate_exposure,
)
from .errors import (
    DegenerateVarianceError,
    NoEffectiveUnitsError,
    ValidationError,
    ZeroJointProbabilityError,
)
from .exposure import ExposureProfile, exact_profile
from .normal import norm_ppf


@dataclass(frozen=True)
class MonotoneCiReport:
    """Result of one upper-bound analysis, with design diagnostics."""

    estimate: float              # mean outcome over effectively treated units
    variance: float              # conservative variance estimate
    condition_ok: bool           # computable-bound condition holds
    upper_bound: float
    alpha: float                 # level actually used (already adjusted in scans)
    n_effective: int
    p: float
    min_joint: float
    overlap_degree: int
    fallback_ok: Optional[bool] = None
    d_min: Optional[int] = None
    d: Optional[int] = None


def _active_values(values, exposure: EffectiveTreatment) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != exposure.indicator.shape:
        raise ValidationError("values and exposure indicator differ in length")
    if exposure.count < 1:
        raise NoEffectiveUnitsError("no unit is effectively treated (count = 0)")
    return values[exposure.indicator > 0]


def point_estimate(values, exposure: EffectiveTreatment) -> float:
    """Average of ``values`` over effectively treated units."""
    return float(_active_values(values, exposure).mean())


def _pair_term(values, exposure, profile: ExposureProfile, clip: bool) -> float:
    idx = np.flatnonzero(exposure.indicator)
    joint = profile.joint[np.ix_(idx, idx)]
    if np.any(joint <= 0.0):
        raise ZeroJointProbabilityError(
            "a jointly exposed pair has zero joint probability; "
            "the exposure profile is inconsistent with the realized assignment"
        )
    centered = profile.centered[np.ix_(idx, idx)]
    if clip:
        centered = np.maximum(centered, 0.0)
    v = np.asarray(values, dtype=float)[idx]
    return float(v @ (centered / joint) @ v)


def _leading_term(values, exposure, profile: ExposureProfile) -> float:
    active = _active_values(values, exposure)
    spread = float(((active - active.mean()) ** 2).mean())
    return profile.n * profile.p * (1.0 - profile.p) * spread


def variance_estimate(values, exposure: EffectiveTreatment, profile: ExposureProfile) -> float:
    """Plug-in estimate of Var(T), T = sum_i (mean(values) - values_i) Z_i.

    Consistent under bounded overlap, but not guaranteed nonnegative in
    finite samples; the conservative variant below is what the observable
    bound uses.
    """
    if profile.n != exposure.indicator.shape[0]:
        raise ValidationError("profile and exposure sizes differ")
    return _leading_term(values, exposure, profile) + _pair_term(values, exposure, profile, clip=False)


def conservative_variance(values, exposure: EffectiveTreatment, profile: ExposureProfile) -> float:
    """Variance estimate with negative centered-excess entries clipped to zero.

    For nonnegative values this never falls below ``variance_estimate`` and
    is safe to maximize over the monotonicity constraint set.
    """
    if profile.n != exposure.indicator.shape[0]:
        raise ValidationError("profile and exposure sizes differ")
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ValidationError("conservative variance requires nonnegative values")
    return _leading_term(values, exposure, profile) + _pair_term(values, exposure, profile, clip=True)


def validity_condition(
    estimate: float,
    variance: float,
    profile: ExposureProfile,
    alpha: float,
    count: int,
) -> bool:
    """Whether plugging the observed outcomes into the bound is maximal.

    The bound as a function of the counterfactual vector has gradient
    componentwise at least (Z_i/count) * (1 - z * (estimate/sqrt(variance)) *
    (n p (1-p) / count)) over the constraint set; when that factor is
    nonnegative the observed outcomes maximize the bound, so the computable
    bound dominates the idealized one.
    """
    if variance < 0:
        raise DegenerateVarianceError(f"negative variance estimate {variance}")
    if variance == 0:
        raise DegenerateVarianceError("zero variance estimate; condition is undefined")
    z = norm_ppf(1.0 - alpha)
    scale = profile.n * profile.p * (1.0 - profile.p) / count
    return 1.0 - z * (estimate / math.sqrt(variance)) * scale >= 0.0


def variance_fallback_ok(variance: float, n: int, alpha: float, variance_floor: float) -> bool:
    """Chebyshev fallback: with variance/n >= floor / (z^2 alpha), the bound
    stays level-(1-alpha) valid even if the true randomization variance sits
    below the floor the normal approximation assumes."""
    if not variance_floor > 0:
        raise ValidationError("variance_floor must be positive")
    z = norm_ppf(1.0 - alpha)
    return variance / n >= variance_floor / (z * z * alpha)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 0.5:
        raise ValidationError(f"alpha must lie in (0, 0.5] for a one-sided upper bound, got {alpha}")


def _bound_from_values(values, exposure, profile, alpha):
    estimate = point_estimate(values, exposure)
    variance = conservative_variance(values, exposure, profile)
    if variance == 0.0:
        raise DegenerateVarianceError(
            "conservative variance is zero (all effectively treated outcomes "
            "identical and no positive centered-excess mass); no bound can be formed"
        )
    condition_ok = validity_condition(estimate, variance, profile, alpha, exposure.count)
    upper = estimate + norm_ppf(1.0 - alpha) * math.sqrt(variance) / exposure.count
    return estimate, variance, condition_ok, upper


def upper_confidence_bound(
    pop: Population,
    exposure: EffectiveTreatment,
    profile: ExposureProfile,
    alpha: float,
    variance_floor: Optional[float] = None,
) -> MonotoneCiReport:
    """One-sided (1 - alpha) upper confidence bound on the full-treatment mean.

    The numeric bound is always computed; when the validity condition fails
    the report flags it as not covered by the dominance guarantee rather than
    discarding it, since the number remains useful for diagnostics.
    """
    _check_alpha(alpha)
    estimate, variance, condition_ok, upper = _bound_from_values(
        pop.outcome, exposure, profile, alpha
    )
    fallback = None
    if variance_floor is not None:
        fallback = variance_fallback_ok(variance, profile.n, alpha, variance_floor)
    return MonotoneCiReport(
        estimate=estimate,
        variance=variance,
        condition_ok=condition_ok,
        upper_bound=upper,
        alpha=alpha,
        n_effective=exposure.count,
        p=profile.p,
        min_joint=profile.min_joint,
        overlap_degree=profile.overlap_degree,
        fallback_ok=fallback,
    )


def ideal_upper_bound(theta, exposure: EffectiveTreatment, profile: ExposureProfile, alpha: float) -> float:
    """Upper bound built from the true counterfactual vector.

    Only evaluable in simulations or tests where the counterfactual is known;
    it is the quantity the observable bound dominates.
    """
    _check_alpha(alpha)
    variance = variance_estimate(theta, exposure, profile)
    if variance <= 0.0:
        raise DegenerateVarianceError(f"variance estimate {variance} is not positive")
    return point_estimate(theta, exposure) + norm_ppf(1.0 - alpha) * math.sqrt(variance) / exposure.count


def full_control_lower_bound(
    pop: Population,
    exposure: EffectiveTreatment,
    profile: ExposureProfile,
    alpha: float,
) -> float:
    """Lower confidence bound on the mean outcome under full control.

    Assumes withholding treatment everywhere gives the worst outcomes, with
    enrollment the known per-unit ceiling; the transformed outcomes
    enrollment - Y then satisfy the monotone setup, and the bound is
    mean(enrollment) minus the upper bound computed on them.
    """
    _check_alpha(alpha)
    if pop.enrollment is None:
        raise ValidationError("full-control bound needs enrollment for every unit")
    transformed = pop.enrollment - pop.outcome
    _, _, _, upper = _bound_from_values(transformed, exposure, profile, alpha)
    return float(pop.enrollment.mean()) - upper


def bonferroni_scan(
    pop: Population,
    configs: Sequence[tuple],
    alpha: float,
    variance_floor: Optional[float] = None,
    mapping_kind: str = "threshold",
) -> list:
    """Evaluate several (d_min, d) designs, each at level alpha / #configs.

    Every report records its own effective level; exceptions from individual
    configurations propagate unchanged.
    """
    configs = list(configs)
    if not configs:
        raise ValidationError("at least one (d_min, d) configuration is required")
    _check_alpha(alpha)
    adjusted = alpha / len(configs)
    reports = []
    for d_min, d in configs:
        nbhd = build_knn_neighborhoods(pop, d)
        if mapping_kind == "threshold":
            mapping = ExposureMapping.threshold(d_min)
        elif mapping_kind == "product":
            mapping = ExposureMapping.product()
        else:
            raise ValidationError(f"unknown mapping kind {mapping_kind!r}")
        profile = exact_profile(nbhd, mapping, pop.rho)
        exposure = evaluate_exposure(pop, nbhd, mapping)
        report = upper_confidence_bound(pop, exposure, profile, adjusted, variance_floor)
        reports.append(replace(report, d_min=int(d_min), d=int(d)))
    return reports
