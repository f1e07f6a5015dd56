"""Experiment representation: units, neighborhoods, and exposure mappings.

A :class:`Population` holds the observed experiment (coordinates, binary
treatments, nonnegative outcomes). Neighborhoods are index sets, one per
unit, always containing the unit itself and all of one size, so that every
unit has the same probability of effective treatment. An exposure mapping
collapses the treatment pattern on a neighborhood into a binary indicator of
effective treatment.

All types are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ValidationError


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Unit:
    """A single experimental unit.

    ``enrollment``, when present, is a known upper bound on the outcome
    (e.g. the number of individuals at a site) and enables lower bounds on
    the full-control counterfactual.
    """

    id: object
    coords: tuple
    treatment: int
    outcome: float
    enrollment: Optional[float] = None

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise ValidationError(f"unit {self.id!r}: treatment must be 0 or 1, got {self.treatment!r}")
        if not self.outcome >= 0:
            raise ValidationError(f"unit {self.id!r}: outcome must be nonnegative, got {self.outcome!r}")
        if self.enrollment is not None and self.outcome > self.enrollment:
            raise ValidationError(
                f"unit {self.id!r}: outcome {self.outcome!r} exceeds enrollment "
                f"{self.enrollment!r} (enrollment is an upper bound on the outcome)"
            )


@dataclass(frozen=True)
class Population:
    """An ordered collection of units with a common treatment probability."""

    ids: tuple
    coords: np.ndarray        # (n, dim) float
    treatment: np.ndarray     # (n,) int8, values in {0, 1}
    outcome: np.ndarray       # (n,) float, nonnegative
    rho: float                # treatment probability, in (0, 1)
    enrollment: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2:
            raise ValidationError("coordinates must form an (n, dim) array")
        n = coords.shape[0]
        if n < 2:
            raise ValidationError(f"a population needs at least 2 units, got {n}")
        ids = tuple(self.ids)
        if len(ids) != n:
            raise ValidationError(f"{len(ids)} ids for {n} coordinate rows")
        if len(set(ids)) != n:
            raise ValidationError("unit ids must be unique")
        treatment = np.asarray(self.treatment)
        if treatment.shape != (n,) or not np.isin(treatment, (0, 1)).all():
            raise ValidationError("treatment must be a length-n vector of 0/1 values")
        outcome = np.asarray(self.outcome, dtype=float)
        if outcome.shape != (n,) or not np.all(outcome >= 0):
            raise ValidationError("outcome must be a length-n vector of nonnegative values")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"treatment probability must lie in (0, 1), got {self.rho}")
        enrollment = self.enrollment
        if enrollment is not None:
            enrollment = np.asarray(enrollment, dtype=float)
            if enrollment.shape != (n,):
                raise ValidationError("enrollment must be a length-n vector")
            bad = np.flatnonzero(outcome > enrollment)
            if bad.size:
                i = int(bad[0])
                raise ValidationError(
                    f"unit {ids[i]!r}: outcome {outcome[i]} exceeds enrollment "
                    f"{enrollment[i]} (enrollment is an upper bound on the outcome)"
                )
            object.__setattr__(self, "enrollment", _frozen_array(enrollment, float))
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "coords", _frozen_array(coords, float))
        object.__setattr__(self, "treatment", _frozen_array(treatment, np.int8))
        object.__setattr__(self, "outcome", _frozen_array(outcome, float))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def from_units(cls, units: Sequence[Unit], rho: float) -> "Population":
        if not units:
            raise ValidationError("empty unit list")
        dims = {len(u.coords) for u in units}
        if len(dims) != 1:
            raise ValidationError(f"all coordinate vectors must share one dimension, got dimensions {sorted(dims)}")
        enrollment = None
        have = [u.enrollment is not None for u in units]
        if any(have):
            if not all(have):
                raise ValidationError("enrollment must be present for all units or none")
            enrollment = [u.enrollment for u in units]
        return cls(
            ids=tuple(u.id for u in units),
            coords=np.array([u.coords for u in units], dtype=float),
            treatment=np.array([u.treatment for u in units]),
            outcome=np.array([u.outcome for u in units], dtype=float),
            rho=rho,
            enrollment=enrollment,
        )


@dataclass(frozen=True)
class NeighborhoodSet:
    """One index set per unit; unit i always belongs to its own set.

    All sets have the same size. This is enforced because the inference
    downstream requires every unit to have the same probability of effective
    treatment, which in practice means equally sized neighborhoods.
    """

    members: np.ndarray  # (n, k) int64, each row sorted ascending

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        if members.ndim != 2:
            raise ValidationError("neighborhood members must form an (n, k) index array")
        n, k = members.shape
        if k < 1:
            raise ValidationError("neighborhoods must be nonempty")
        if members.min(initial=0) < 0 or members.max(initial=0) >= n:
            raise ValidationError("neighborhood indices out of range")
        members = np.sort(members, axis=1)
        if any(np.unique(row).size != k for row in members):
            raise ValidationError("neighborhood sets must not contain repeated indices")
        rows = np.arange(n)
        self_in = (members == rows[:, None]).any(axis=1)
        if not self_in.all():
            i = int(np.flatnonzero(~self_in)[0])
            raise ValidationError(f"unit {i} is missing from its own neighborhood")
        object.__setattr__(self, "members", _frozen_array(members, np.int64))

    @property
    def n(self) -> int:
        return self.members.shape[0]

    @property
    def k(self) -> int:
        return self.members.shape[1]

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[int]]) -> "NeighborhoodSet":
        rows = [sorted(set(int(j) for j in s)) for s in sets]
        sizes = {len(r) for r in rows}
        if len(sizes) != 1:
            raise ValidationError(
                f"all neighborhoods must have the same size so that exposure "
                f"probabilities are uniform; got sizes {sorted(sizes)}"
            )
        return cls(members=np.array(rows, dtype=np.int64))

    def as_sets(self) -> list:
        return [frozenset(int(j) for j in row) for row in self.members]

    def incidence(self) -> np.ndarray:
        """Dense (n, n) 0/1 matrix M with M[i, u] = 1 iff u is in set i."""
        n = self.n
        m = np.zeros((n, n), dtype=float)
        m[np.repeat(np.arange(n), self.k), self.members.ravel()] = 1.0
        return m


@dataclass(frozen=True)
class ExposureMapping:
    """Rule turning the treatment pattern on a neighborhood into 0/1.

    ``product``: effectively treated iff every neighborhood member is treated.
    ``threshold``: effectively treated iff the unit itself is treated and at
    least ``d_min`` neighborhood members (the unit included) are treated.
    """

    kind: str
    d_min: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("product", "threshold"):
            raise ValidationError(f"unknown exposure mapping kind {self.kind!r}")
        if self.kind == "threshold":
            if self.d_min is None or int(self.d_min) < 1:
                raise ValidationError("threshold mapping needs d_min >= 1")
            object.__setattr__(self, "d_min", int(self.d_min))
        elif self.d_min is not None:
            raise ValidationError("product mapping takes no d_min")

    @classmethod
    def product(cls) -> "ExposureMapping":
        return cls(kind="product")

    @classmethod
    def threshold(cls, d_min: int) -> "ExposureMapping":
        return cls(kind="threshold", d_min=d_min)


@dataclass(frozen=True)
class EffectiveTreatment:
    """Realized effective-treatment indicators and their total count."""

    indicator: np.ndarray  # (n,) int8
    count: int

    def __post_init__(self):
        indicator = np.asarray(self.indicator, dtype=np.int8)
        if indicator.ndim != 1 or not np.isin(indicator, (0, 1)).all():
            raise ValidationError("indicator must be a vector of 0/1 values")
        if int(indicator.sum()) != self.count:
            raise ValidationError("count does not match the indicator sum")
        object.__setattr__(self, "indicator", _frozen_array(indicator, np.int8))


def build_knn_neighborhoods(pop_or_coords, d: int) -> NeighborhoodSet:
    """Each unit's set is itself plus its d-1 nearest units (Euclidean).

    Distance ties are broken by ascending unit index, so the result is
    deterministic across platforms.
    """
    coords = np.asarray(getattr(pop_or_coords, "coords", pop_or_coords), dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.ndim != 2:
        raise ValidationError("coordinates must form an (n, dim) array")
    if not np.isfinite(coords).all():
        raise ValidationError("coordinates must be finite")
    n = coords.shape[0]
    d = int(d)
    if not 1 <= d <= n:
        raise ValidationError(f"neighborhood size d must satisfy 1 <= d <= {n}, got {d}")
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    members = np.empty((n, d), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, dist[i]))
        others = order[order != i][: d - 1]
        members[i, 0] = i
        members[i, 1:] = others
    return NeighborhoodSet(members=np.sort(members, axis=1))


def _check_mapping(nbhd: NeighborhoodSet, mapping: ExposureMapping) -> None:
    if mapping.kind == "threshold" and mapping.d_min > nbhd.k:
        raise ValidationError(
            f"threshold d_min={mapping.d_min} exceeds the neighborhood size {nbhd.k}"
        )


def evaluate_exposure_many(x, nbhd: NeighborhoodSet, mapping: ExposureMapping) -> np.ndarray:
    """Vectorized exposure evaluation for an (s, n) batch of assignments."""
    _check_mapping(nbhd, mapping)
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != nbhd.n:
        raise ValidationError(f"assignment batch must have shape (s, {nbhd.n})")
    if not (((x == 0) | (x == 1)).all()):
        raise ValidationError("treatment assignments must be 0/1")
    xf = x.astype(float)
    treated_in_set = xf @ nbhd.incidence().T  # (s, n), exact small integers
    if mapping.kind == "product":
        z = treated_in_set > nbhd.k - 0.5
    else:
        z = (xf > 0.5) & (treated_in_set > mapping.d_min - 0.5)
    return z.astype(np.int8)


def evaluate_exposure(pop_or_x, nbhd: NeighborhoodSet, mapping: ExposureMapping) -> EffectiveTreatment:
    """Apply the exposure mapping to one realized assignment."""
    x = np.asarray(getattr(pop_or_x, "treatment", pop_or_x))
    if x.ndim != 1:
        raise ValidationError("treatment assignment must be a vector")
    z = evaluate_exposure_many(x[None, :], nbhd, mapping)[0]
    return EffectiveTreatment(indicator=z, count=int(z.sum()))
