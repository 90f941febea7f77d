import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falselab import case1
from falselab.errors import ConstructionError, DomainError, ParameterError

P = case1.Case1Problem()  # a=20, K=26, eps=1e-2, delta=1e-4


class TestProblem:
    def test_b_value(self):
        assert P.b == pytest.approx(20 / 27)

    def test_epsilon_bound_value(self):
        b = P.b
        assert b * b / (2 * (P.a - b)) == pytest.approx(0.014245, abs=1e-6)

    def test_a_not_less_than_K_rejected(self):
        with pytest.raises(ConstructionError):
            case1.Case1Problem(a=26, K=26)

    def test_epsilon_too_large_rejected(self):
        with pytest.raises(ConstructionError, match="epsilon"):
            case1.Case1Problem(epsilon=0.02)

    def test_delta_not_below_epsilon_rejected(self):
        with pytest.raises(ConstructionError, match="delta"):
            case1.Case1Problem(delta=1e-2)


class TestParityLabel:
    def test_at_one(self):
        assert case1.parity_label(P, 1.0) == 0  # ceil(20) = 20, even

    def test_inside_last_interval(self):
        assert case1.parity_label(P, 0.97) == 1  # ceil(20.62) = 21, odd

    def test_a_equals_one(self):
        p1 = case1.Case1Problem(a=1, K=3, epsilon=0.03, delta=0.01)
        assert case1.parity_label(p1, 1.0) == 1  # ceil(1) = 1, odd

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            case1.parity_label(P, 0.0)
        with pytest.raises(DomainError):
            case1.parity_label(P, np.array([0.5, -1.0]))

    def test_vectorized_matches_scalar(self):
        xs = np.linspace(P.b, 1.0, 257)
        vec = case1.parity_label(P, xs)
        assert vec.tolist() == [case1.parity_label(P, float(v)) for v in xs]


class TestStableRegion:
    def test_interval_count(self):
        assert len(case1.stable_region(P)) == P.K - P.a + 1 == 7

    def test_first_interval_is_k26(self):
        lo, hi = case1.stable_region(P).intervals[0]
        assert lo == pytest.approx(20 / 27 + 0.01)
        assert hi == pytest.approx(20 / 26 - 0.01)
        assert (lo, hi) == pytest.approx((0.75074, 0.75923), abs=5e-6)

    def test_last_interval_is_k20(self):
        lo, hi = case1.stable_region(P).intervals[-1]
        assert (lo, hi) == pytest.approx((20 / 21 + 0.01, 0.99))

    def test_label_constant_on_each_interval(self):
        for lo, hi in case1.stable_region(P):
            xs = np.linspace(lo + 1e-12, hi - 1e-12, 10_000)
            labels = case1.parity_label(P, xs)
            assert np.all(labels == labels[0])

    def test_contains_open_endpoints(self):
        region = case1.stable_region(P)
        lo, hi = region.intervals[0]
        assert not region.contains(lo)
        assert not region.contains(hi)
        assert region.contains(0.5 * (lo + hi))

    def test_contains_matches_bruteforce(self, rng):
        region = case1.stable_region(P)
        xs = rng.uniform(P.b - 0.05, 1.05, size=4000)
        fast = region.contains(xs)
        slow = np.array([any(lo < x < hi for lo, hi in region) for x in xs])
        assert np.array_equal(fast, slow)


class TestGenerators:
    def test_delta_lift_exact_value(self, rng):
        points = case1.sample_training_set(P, 200, "delta", rng)
        for pt in points:
            if pt.label == 1:
                assert pt.x2 == 1e-4
            else:
                assert pt.x2 == 0.0

    def test_zero_lift(self, rng):
        points = case1.sample_training_set(P, 100, "zero", rng)
        assert all(pt.x2 == 0.0 for pt in points)

    def test_seven_samples_cover_seven_intervals(self, rng):
        points = case1.sample_training_set(P, 7, "delta", rng)
        region = case1.stable_region(P)
        homes = set()
        for pt in points:
            for i, (lo, hi) in enumerate(region):
                if lo < pt.x1 < hi:
                    homes.add(i)
        assert homes == set(range(7))

    def test_even_distribution(self, rng):
        points = case1.sample_training_set(P, 5000, "zero", rng)
        region = case1.stable_region(P)
        counts = np.zeros(7, dtype=int)
        for pt in points:
            for i, (lo, hi) in enumerate(region):
                if lo < pt.x1 < hi:
                    counts[i] += 1
        assert counts.sum() == 5000
        assert counts.max() - counts.min() <= 1

    def test_labels_match_ground_truth(self, rng):
        points = case1.sample_training_set(P, 500, "delta", rng)
        for pt in points:
            assert pt.label == case1.parity_label(P, pt.x1)

    def test_labels_stable_under_small_x1_shift(self, rng):
        region = case1.stable_region(P)
        points = case1.sample_training_set(P, 50, "delta", rng)
        for pt in points:
            lo, hi = next((l, h) for l, h in region if l < pt.x1 < h)
            margin = min(pt.x1 - lo, hi - pt.x1)
            for shift in (-0.9 * margin, 0.9 * margin):
                assert case1.parity_label(P, pt.x1 + shift) == pt.label

    def test_per_interval_rule_needs_enough_samples(self, rng):
        with pytest.raises(ParameterError):
            case1.sample_training_set(P, 3, "delta", rng, per_interval=True)

    def test_bad_lift_rejected(self, rng):
        with pytest.raises(ParameterError):
            case1.sample_training_set(P, 7, "tilted", rng)


class TestDiagnosticSets:
    def test_c0_is_flat(self):
        diag = case1.diagnostic_sets(P, 500)
        assert np.all(diag.c0[:, 1] == 0.0)

    def test_cdelta_second_coordinate_values(self):
        diag = case1.diagnostic_sets(P, 500)
        assert set(np.unique(diag.cdelta[:, 1])) <= {0.0, P.delta}
        assert np.array_equal(diag.cdelta[:, 1] != 0.0, diag.labels == 1)

    def test_grid_covers_closed_range(self):
        diag = case1.diagnostic_sets(P, 100)
        assert diag.x1[0] == pytest.approx(P.b)
        assert diag.x1[-1] == 1.0

    def test_mask_against_bruteforce(self):
        diag = case1.diagnostic_sets(P, 2000)
        region = case1.stable_region(P)
        slow = np.array([any(lo < x < hi for lo, hi in region) for x in diag.x1])
        assert np.array_equal(diag.in_stable, slow)
        per_interval = [
            np.sum((diag.x1 > lo) & (diag.x1 < hi)) for lo, hi in region
        ]
        assert diag.in_stable.sum() == sum(per_interval)

    def test_too_small_grid_rejected(self):
        with pytest.raises(ParameterError):
            case1.diagnostic_sets(P, 1)


class TestShortcutRule:
    def test_zero(self):
        assert case1.nonzero_x2_label(0.0) == 0

    def test_delta(self):
        assert case1.nonzero_x2_label(1e-4) == 1

    def test_tiny_negative(self):
        assert case1.nonzero_x2_label(-1e-300) == 1

    def test_shortcut_matches_truth_on_lifted_samples(self, rng):
        points = case1.sample_training_set(P, 300, "delta", rng)
        for pt in points:
            assert case1.nonzero_x2_label(pt.x2) == case1.parity_label(P, pt.x1)

    def test_disagreement_witness_exists_on_flat_grid(self):
        # some (x1, 0) has truth 1 but shortcut 0, guaranteed since K > a
        diag = case1.diagnostic_sets(P, 200)
        truth = case1.parity_label(P, diag.c0[:, 0])
        shortcut = case1.nonzero_x2_label(diag.c0[:, 1])
        assert np.any((truth == 1) & (shortcut == 0))


@settings(max_examples=200, deadline=None)
@given(
    k=st.integers(min_value=20, max_value=26),
    t=st.floats(min_value=1e-9, max_value=1 - 1e-9),
)
def test_label_on_stable_interval_is_parity_of_k_plus_1(k, t):
    lo = 20 / (k + 1) + 0.01
    hi = 20 / k - 0.01
    x1 = lo + t * (hi - lo)
    assert case1.parity_label(P, x1) == (k + 1) % 2
