
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import interfere as itf
from interfere.errors import ValidationError

from conftest import random_design


class TestExactMarginal:
    def test_product_is_rho_to_k(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(5.0)[:, None], 3)
        assert itf.exact_marginal(nbhd, itf.ExposureMapping.product(), 0.5) == pytest.approx(0.125)

    def test_threshold_enumeration_case(self):
        # k=3, d_min=2, rho=0.5: enumerate the 8 patterns of one neighborhood.
        # Unit treated (prob 1/2) and at least one of the two others treated
        # (prob 3/4): p = 0.375.
        nbhd = itf.build_knn_neighborhoods(np.arange(5.0)[:, None], 3)
        p = itf.exact_marginal(nbhd, itf.ExposureMapping.threshold(2), 0.5)
        assert p == pytest.approx(0.375, abs=1e-15)

    def test_threshold_1_1_is_rho(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(4.0)[:, None], 1)
        assert itf.exact_marginal(nbhd, itf.ExposureMapping.threshold(1), 0.5) == pytest.approx(0.5)


class TestEnumeratedOracle:
    def test_single_unit_1_1(self):
        nbhd = itf.NeighborhoodSet.from_sets([{0}])
        profile = itf.enumerated_profile(nbhd, itf.ExposureMapping.threshold(1), 0.3)
        assert profile.p == pytest.approx(0.3, abs=1e-15)
        assert profile.min_joint == pytest.approx(0.3)

    def test_shared_neighborhood_product(self):
        nbhd = itf.NeighborhoodSet.from_sets([{0, 1, 2}] * 3)
        profile = itf.enumerated_profile(nbhd, itf.ExposureMapping.product(), 0.5)
        assert np.allclose(profile.joint, 0.125)

    def test_rejects_large_populations(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(21.0)[:, None], 1)
        with pytest.raises(ValidationError, match="at most 20"):
            itf.enumerated_profile(nbhd, itf.ExposureMapping.product(), 0.5)


class TestExactProfile:
    def test_matches_oracle_on_random_designs(self, rng):
        for _ in range(20):
            nbhd, mapping, rho = random_design(rng)
            exact = itf.exact_profile(nbhd, mapping, rho)
            oracle = itf.enumerated_profile(nbhd, mapping, rho)
            assert np.abs(exact.joint - oracle.joint).max() <= 1e-12
            assert abs(exact.p - oracle.p) <= 1e-12

    def test_product_pair_hand_example(self):
        # sets {0,1} and {1,2} at rho=0.5: union of size 3 gives joint 1/8,
        # and excess = 1/8 - p^2 = 0.0625 (brute force over the 8 patterns).
        nbhd = itf.NeighborhoodSet.from_sets([{0, 1}, {1, 2}, {2, 0}])
        profile = itf.exact_profile(nbhd, itf.ExposureMapping.product(), 0.5)
        assert profile.joint[0, 1] == pytest.approx(0.125, abs=1e-15)
        assert profile.excess[0, 1] == pytest.approx(0.0625, abs=1e-15)

    def test_disjoint_pairs_factorize(self):
        coords = np.array([[0.0], [1.0], [100.0], [101.0]])
        for mapping in (itf.ExposureMapping.product(), itf.ExposureMapping.threshold(2)):
            profile = itf.exact_profile(itf.build_knn_neighborhoods(coords, 2), mapping, 0.4)
            assert profile.joint[0, 2] == pytest.approx(profile.p**2, abs=1e-15)
            assert profile.excess[0, 2] == pytest.approx(0.0, abs=1e-15)

    def test_singleton_neighborhoods_have_zero_excess(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(6.0)[:, None], 1)
        profile = itf.exact_profile(nbhd, itf.ExposureMapping.threshold(1), 0.5)
        assert np.abs(profile.excess).max() == pytest.approx(0.0, abs=1e-15)
        assert np.abs(profile.centered).max() == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_joint_matrix_invariants(self, seed):
        gen = np.random.default_rng(seed)
        nbhd, mapping, rho = random_design(gen, max_units=9)
        profile = itf.exact_profile(nbhd, mapping, rho)
        joint = profile.joint
        assert np.array_equal(joint, joint.T)
        assert np.allclose(np.diagonal(joint), profile.p, atol=1e-15)
        upper = np.minimum.outer(np.diagonal(joint), np.diagonal(joint))
        assert np.all(joint <= upper + 1e-12)
        assert np.all(joint >= -1e-15)
        # centered matrix has zero row, column, and overall sums
        assert np.abs(profile.centered.sum(axis=0)).max() < 1e-10
        assert np.abs(profile.centered.sum(axis=1)).max() < 1e-10
        assert abs(profile.centered.sum()) < 1e-10


class TestCenterExcess:
    def test_zero_excess_maps_to_zero(self):
        n = 4
        p = 0.3
        joint = p * (1 - p) * np.eye(n) + p * p * np.ones((n, n))
        excess, centered = itf.center_excess(joint, p)
        assert np.abs(excess).max() == pytest.approx(0.0, abs=1e-15)
        assert np.abs(centered).max() == pytest.approx(0.0, abs=1e-15)

    def test_random_symmetric_centering(self, rng):
        raw = rng.random((5, 5))
        joint = (raw + raw.T) / 2
        _, centered = itf.center_excess(joint, 0.4)
        assert np.abs(centered.sum(axis=0)).max() < 1e-10
        assert np.abs(centered.sum(axis=1)).max() < 1e-10

    def test_rejects_asymmetric_input(self, rng):
        joint = rng.random((4, 4))
        joint[0, 1] = joint[1, 0] + 1.0
        with pytest.raises(ValidationError, match="symmetric"):
            itf.center_excess(joint, 0.5)


class TestOverlapDegree:
    def test_singletons(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(5.0)[:, None], 1)
        assert itf.overlap_degree(nbhd) == 0

    def test_everyone_overlaps(self):
        nbhd = itf.NeighborhoodSet.from_sets([{0, 1, 2, 3}] * 4)
        assert itf.overlap_degree(nbhd) == 3

    def test_line_layout_d2(self):
        # Sets are {0,1},{0,1},{1,2},{2,3},{3,4}; unit 2's set meets sets
        # 0, 1, and 3, so the maximum is 3 (independent set-intersection count
        # below confirms it).
        nbhd = itf.build_knn_neighborhoods(np.arange(5.0)[:, None], 2)
        sets = nbhd.as_sets()
        expected = max(
            sum(1 for j in range(5) if j != i and sets[i] & sets[j]) for i in range(5)
        )
        assert expected == 3
        assert itf.overlap_degree(nbhd) == 3


class TestMonteCarloProfile:
    def test_fixed_seed_is_bit_identical(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(6.0)[:, None], 2)
        mapping = itf.ExposureMapping.threshold(2)
        a = itf.monte_carlo_profile(nbhd, mapping, 0.5, 5000, seed=42)
        b = itf.monte_carlo_profile(nbhd, mapping, 0.5, 5000, seed=42)
        assert np.array_equal(a.joint, b.joint)
        assert a.p == b.p

    def test_single_sample_entries_are_binary(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(5.0)[:, None], 2)
        profile = itf.monte_carlo_profile(nbhd, itf.ExposureMapping.product(), 0.5, 1, seed=1)
        assert np.isin(profile.joint, (0.0, 1.0)).all()

    def test_converges_to_exact_within_3_standard_errors(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(4.0)[:, None], 2)
        mapping = itf.ExposureMapping.threshold(2)
        exact = itf.exact_profile(nbhd, mapping, 0.5)
        samples = 1_000_000
        mc = itf.monte_carlo_profile(nbhd, mapping, 0.5, samples, seed=7)
        se = np.sqrt(exact.joint * (1 - exact.joint) / samples)
        gap = np.abs(mc.joint - exact.joint)
        assert np.all(gap <= 3.0 * np.maximum(se, 1e-12))

    def test_thread_count_does_not_change_result(self, monkeypatch):
        nbhd = itf.build_knn_neighborhoods(np.arange(6.0)[:, None], 2)
        mapping = itf.ExposureMapping.threshold(1)
        samples = (1 << 16) + 1234  # force several shards
        monkeypatch.setenv("INTERFERE_THREADS", "1")
        serial = itf.monte_carlo_profile(nbhd, mapping, 0.5, samples, seed=3)
        monkeypatch.setenv("INTERFERE_THREADS", "4")
        threaded = itf.monte_carlo_profile(nbhd, mapping, 0.5, samples, seed=3)
        assert np.array_equal(serial.joint, threaded.joint)

    def test_records_method_and_samples(self):
        nbhd = itf.build_knn_neighborhoods(np.arange(4.0)[:, None], 1)
        profile = itf.monte_carlo_profile(nbhd, itf.ExposureMapping.product(), 0.5, 10, seed=0)
        assert profile.method == "monte_carlo"
        assert profile.num_samples == 10


class TestVarianceIdentity:
    def test_disjoint_design_variance_is_leading_term(self, rng):
        # Pairwise-disjoint neighborhoods force singletons (every set contains
        # its own unit); there the centered excess vanishes, so the quadratic
        # form in the joint matrix must equal the leading term alone.
        coords = np.array([[0.0], [1.0], [50.0], [51.0], [100.0], [101.0]])
        nbhd = itf.build_knn_neighborhoods(coords, 1)
        profile = itf.exact_profile(nbhd, itf.ExposureMapping.product(), 0.5)
        assert np.abs(profile.centered).max() < 1e-14
        for _ in range(10):
            theta = rng.gamma(2.0, 5.0, size=6)
            centered_theta = theta - theta.mean()
            quad = centered_theta @ profile.joint @ centered_theta
            lead = 6 * profile.p * (1 - profile.p) * (centered_theta**2).mean()
            assert quad == pytest.approx(lead, rel=1e-10, abs=1e-12)


class TestDiagnosticsConfig:
    def test_validation(self):
        itf.DiagnosticsConfig(outcome_bound=10.0, overlap_cap=4, variance_floor=1.0)
        with pytest.raises(ValidationError):
            itf.DiagnosticsConfig(outcome_bound=0.0, overlap_cap=4, variance_floor=1.0)
        with pytest.raises(ValidationError):
            itf.DiagnosticsConfig(outcome_bound=1.0, overlap_cap=4, variance_floor=0.0)
