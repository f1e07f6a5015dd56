"""Attributable-contrast intervals that need no interference assumptions.

The estimand is the difference between the observed treated-vs-control
contrast and the contrast the same grouping would have shown under full
control. It concentrates because the full-control outcomes are fixed and the
grouping is randomized, so the intervals below are valid under completely
arbitrary interference; the price is that the estimand speaks only about the
contrast, not about either arm separately.

Both interval families assume binary outcomes (their variance bound of 1/4 is
specific to that case). The treatment-split interval assumes assignment by
sampling without replacement; the exposure-split interval assumes Bernoulli
assignment plus the same design conditions as the monotone machinery, which
cannot be validated from observed data and are therefore recorded in the
report text.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import EffectiveTreatment, evaluate_exposure_many
from .errors import PowerIterationError, ValidationError
from .exposure import ExposureProfile, exact_profile
from .normal import norm_ppf

_TREATMENT_ASSUMPTIONS = (
    "treatments assigned by sampling without replacement; binary outcomes; "
    "interference otherwise arbitrary"
)
_EXPOSURE_ASSUMPTIONS = (
    "independent Bernoulli treatment assignment; binary outcomes; shared "
    "exposure probability, bounded neighborhood overlap, and non-degenerate "
    "randomization variance of the full-control contrast statistic (the last "
    "three are not checkable from observed data)"
)


@dataclass(frozen=True)
class ContrastReport:
    """Point contrast with one-sided and symmetric two-sided intervals."""

    kind: str                    # "treatment" or "exposure" split
    delta: float
    one_sided_lower: float
    two_sided: tuple             # (lower, upper), centered at delta
    alpha: float
    n_exposed: int
    n_unexposed: int
    lambda_1: Optional[float] = None
    assumptions: str = ""


@dataclass(frozen=True)
class ConcentrationSummary:
    """Empirical exceedance of a contrast bound under a known full-control vector."""

    kind: str
    num_draws: int
    num_valid: int
    num_degenerate: int
    bound: float
    exceed_count: int
    exceed_fraction: float
    alpha: float


def _check_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must be binary (0/1); rescaling is not supported")
    return arr.astype(float)


def _check_two_sided_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def attributable_contrast_from_counts(
    n_treated: int,
    pos_treated: int,
    n_control: int,
    pos_control: int,
    alpha: float,
) -> ContrastReport:
    """Treatment-split interval from aggregate two-arm counts.

    The interval half-widths depend on the data only through the group sizes,
    so aggregate counts are fully equivalent to unit-level rows.
    """
    _check_two_sided_alpha(alpha)
    for total, pos, name in (
        (n_treated, pos_treated, "treated"),
        (n_control, pos_control, "control"),
    ):
        if int(total) < 1:
            raise ValidationError(f"{name} arm is empty; both arms are required")
        if not 0 <= int(pos) <= int(total):
            raise ValidationError(f"{name} positives must lie in [0, {total}], got {pos}")
    n1, n0 = int(n_treated), int(n_control)
    n = n1 + n0
    delta = pos_treated / n1 - pos_control / n0
    scale = 0.5 * math.sqrt(n / (n0 * n1))
    one_sided = delta - norm_ppf(1.0 - alpha) * scale
    half = norm_ppf(1.0 - alpha / 2.0) * scale
    return ContrastReport(
        kind="treatment",
        delta=float(delta),
        one_sided_lower=float(one_sided),
        two_sided=(float(delta - half), float(delta + half)),
        alpha=alpha,
        n_exposed=n1,
        n_unexposed=n0,
        lambda_1=None,
        assumptions=_TREATMENT_ASSUMPTIONS,
    )


def attributable_contrast(x, y, alpha: float) -> ContrastReport:
    """Treatment-split attributable contrast from unit-level binary data."""
    x = _check_binary(x, "treatment")
    y = _check_binary(y, "outcome")
    if x.shape != y.shape:
        raise ValidationError("treatment and outcome vectors differ in length")
    n1 = int(x.sum())
    n0 = int(x.size - n1)
    if n1 < 1 or n0 < 1:
        raise ValidationError("both a treated and a control group are required")
    return attributable_contrast_from_counts(n1, int(y[x > 0].sum()), n0, int(y[x == 0].sum()), alpha)


def largest_centered_eigenvalue(
    joint,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Largest eigenvalue of (I - 11'/n) J (I - 11'/n) for symmetric PSD J.

    Block power iteration (block size 2, closed-form Ritz values) with the
    centering applied implicitly to matrix-block products, so the centered
    matrix is never materialized; the two-dimensional block keeps convergence
    fast even when the top two eigenvalues nearly coincide, which is the
    normal situation for joint-probability matrices of local designs. The
    start block is seeded and mean-zero, iterations are capped, and the
    accepted value always carries a residual certificate
    |result - eigenvalue| <= tol * result.
    """
    joint = np.asarray(joint, dtype=float)
    n = joint.shape[0]
    if joint.ndim != 2 or joint.shape[1] != n:
        raise ValidationError("matrix must be square")
    if not np.allclose(joint, joint.T, rtol=0.0, atol=1e-12):
        raise ValidationError("matrix must be symmetric")
    if n == 1:
        return 0.0
    if max_iter is None:
        max_iter = max(10 * n, 1000)
    width = min(2, n - 1)
    rng = np.random.default_rng(seed)
    block = rng.standard_normal((n, width))
    block -= block.mean(axis=0)
    block, _ = np.linalg.qr(block)
    residual = math.inf
    value = 0.0
    for _ in range(max_iter):
        image = joint @ block
        image -= image.mean(axis=0)
        projected = block.T @ image
        projected = (projected + projected.T) / 2.0
        if width == 1:
            value = float(projected[0, 0])
            coef = np.array([1.0])
        else:
            a, b, c = projected[0, 0], projected[0, 1], projected[1, 1]
            half_gap = math.hypot((a - c) / 2.0, b)
            value = (a + c) / 2.0 + half_gap
            coef = np.array([b, value - a])
            norm_coef = float(np.linalg.norm(coef))
            coef = np.array([1.0, 0.0]) if norm_coef == 0.0 else coef / norm_coef
        top = block @ coef
        residual = float(np.linalg.norm(image @ coef - value * top))
        if residual <= tol * max(abs(value), 1e-30):
            break
        next_block, diag = np.linalg.qr(image)
        if not np.abs(np.diagonal(diag)).max() > 0.0:
            value = 0.0
            residual = 0.0
            break
        # QR may complete a rank-deficient block with an uncentered column;
        # restore exact centering so Ritz values never leave the centered
        # subspace (where they could overestimate).
        next_block -= next_block.mean(axis=0)
        block, _ = np.linalg.qr(next_block)
    else:
        raise PowerIterationError(
            f"power iteration did not reach tolerance {tol} in {max_iter} "
            f"iterations (residual {residual:.3e})",
            residual=residual,
            iterations=max_iter,
        )
    if value < -tol * max(1.0, float(np.abs(joint).max())):
        raise ValidationError("matrix is not positive semidefinite; dominant eigenvalue is negative")
    return max(value, 0.0)


def exposure_attributable_contrast(
    y,
    exposure: EffectiveTreatment,
    profile: ExposureProfile,
    alpha: float,
) -> ContrastReport:
    """Attributable contrast for the effective-treatment split of the units."""
    _check_two_sided_alpha(alpha)
    y = _check_binary(y, "outcome")
    n = profile.n
    if y.size != n:
        raise ValidationError("outcome vector and profile differ in length")
    count = exposure.count
    if count < 1 or count > n - 1:
        raise ValidationError(
            f"the exposure split needs both groups nonempty, got {count} of {n} exposed"
        )
    active = exposure.indicator > 0
    delta = float(y[active].mean() - y[~active].mean())
    lam = largest_centered_eigenvalue(profile.joint)
    scale = math.sqrt(lam / n) / (2.0 * profile.p * (1.0 - profile.p))
    one_sided = delta - norm_ppf(1.0 - alpha) * scale
    half = norm_ppf(1.0 - alpha / 2.0) * scale
    return ContrastReport(
        kind="exposure",
        delta=delta,
        one_sided_lower=float(one_sided),
        two_sided=(float(delta - half), float(delta + half)),
        alpha=alpha,
        n_exposed=count,
        n_unexposed=n - count,
        lambda_1=lam,
        assumptions=_EXPOSURE_ASSUMPTIONS,
    )


def concentration_check(
    xi,
    num_draws: int,
    design,
    alpha: float = 0.05,
    seed: int = 0,
) -> ConcentrationSummary:
    """Empirically check that the full-control contrast respects its bound.

    ``design`` selects the randomization: an integer is the treated-group
    size for sampling without replacement (treatment split); a tuple
    (neighborhoods, mapping, rho) draws Bernoulli assignments and uses the
    exposure split. Only usable when the full-control vector is known, i.e.
    in simulations.
    """
    xi = _check_binary(xi, "full-control outcomes")
    num_draws = int(num_draws)
    if num_draws < 1:
        raise ValidationError("num_draws must be at least 1")
    _check_two_sided_alpha(alpha)
    n = xi.size
    z = norm_ppf(1.0 - alpha)
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    if isinstance(design, (int, np.integer)):
        n1 = int(design)
        if not 1 <= n1 <= n - 1:
            raise ValidationError(f"treated-group size must lie in [1, {n - 1}], got {n1}")
        n0 = n - n1
        total = xi.sum()
        uniforms = rng.random((num_draws, n))
        treated_idx = np.argpartition(uniforms, n1 - 1, axis=1)[:, :n1]
        treated_sum = xi[treated_idx].sum(axis=1)
        deltas = treated_sum / n1 - (total - treated_sum) / n0
        bound = z * 0.5 * math.sqrt(n / (n0 * n1))
        valid = np.ones(num_draws, dtype=bool)
        kind = "treatment"
    else:
        nbhd, mapping, rho = design
        profile = exact_profile(nbhd, mapping, rho)
        x = (rng.random((num_draws, n)) < rho).astype(np.int8)
        zmat = evaluate_exposure_many(x, nbhd, mapping).astype(float)
        counts = zmat.sum(axis=1)
        valid = (counts > 0) & (counts < n)
        exposed_sum = zmat @ xi
        total = xi.sum()
        deltas = np.full(num_draws, np.nan)
        deltas[valid] = exposed_sum[valid] / counts[valid] - (total - exposed_sum[valid]) / (
            n - counts[valid]
        )
        lam = largest_centered_eigenvalue(profile.joint)
        bound = z * math.sqrt(lam / n) / (2.0 * profile.p * (1.0 - profile.p))
        kind = "exposure"
    exceed = int(np.sum(deltas[valid] > bound))
    num_valid = int(valid.sum())
    return ConcentrationSummary(
        kind=kind,
        num_draws=num_draws,
        num_valid=num_valid,
        num_degenerate=num_draws - num_valid,
        bound=float(bound),
        exceed_count=exceed,
        exceed_fraction=exceed / num_valid if num_valid else math.nan,
        alpha=alpha,
    )
