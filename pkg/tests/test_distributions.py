"""Divergence and entropy primitives against direct-summation oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnjsd import (
    DimensionMismatchError,
    DistributionSet,
    DivergenceUndefinedError,
    MalformedDistributionError,
    ProbField,
    entropy,
    entropy_normalized,
    jsd,
    jsd_normalized,
    kl_divergence,
    mixture,
)


def simplex(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.dirichlet(np.ones(d))


def disjoint_set(n: int, width: int) -> DistributionSet:
    """n members on n non-overlapping cell windows of the given width."""
    members = []
    for k in range(n):
        v = np.zeros(n * width)
        v[k * width : (k + 1) * width] = 1.0 / width
        members.append(ProbField(v))
    return DistributionSet(tuple(members))


class TestKlDivergence:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(11)
        for d in (2, 5, 33):
            p = ProbField(simplex(rng, d))
            assert kl_divergence(p, p) == 0.0

    def test_delta_vs_uniform_is_log_two(self):
        p = ProbField(np.array([1.0, 0.0]))
        q = ProbField(np.array([0.5, 0.5]))
        assert kl_divergence(p, q) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_direct_summation_oracle(self):
        p = np.array([0.7, 0.3])
        q = np.array([0.5, 0.5])
        oracle = sum(pi * math.log(pi / qi) for pi, qi in zip(p, q))
        got = kl_divergence(ProbField(p), ProbField(q))
        assert got == pytest.approx(oracle, abs=1e-15)
        assert got == pytest.approx(0.08228287850505178, abs=1e-15)

    def test_undefined_when_q_vanishes_on_support(self):
        p = ProbField(np.array([0.5, 0.5]))
        q = ProbField(np.array([1.0, 0.0]))
        with pytest.raises(DivergenceUndefinedError):
            kl_divergence(p, q)

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(12)
        for _ in range(500):
            d = int(rng.integers(2, 33))
            a = ProbField(simplex(rng, d))
            b = ProbField(simplex(rng, d))
            assert kl_divergence(a, b) >= 0.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            kl_divergence(ProbField(np.ones(3) / 3), ProbField(np.ones(4) / 4))


class TestMixture:
    def test_singleton_returns_same_values(self):
        p = ProbField(simplex(np.random.default_rng(13), 7))
        np.testing.assert_array_equal(mixture([p]).values, p.values)

    def test_two_deltas_average_to_half(self):
        m = mixture([ProbField(np.array([1.0, 0.0])), ProbField(np.array([0.0, 1.0]))])
        np.testing.assert_array_equal(m.values, np.array([0.5, 0.5]))

    def test_matches_elementwise_mean_of_four(self):
        rng = np.random.default_rng(14)
        rows = [simplex(rng, 9) for _ in range(4)]
        m = mixture([ProbField(r) for r in rows])
        np.testing.assert_allclose(m.values, np.mean(rows, axis=0), atol=1e-15)

    def test_preserves_common_grid_shape(self):
        rng = np.random.default_rng(15)
        fields = [ProbField.from_grid(simplex(rng, 16).reshape(4, 4)) for _ in range(2)]
        assert mixture(fields).shape == (4, 4)


class TestJsd:
    def test_equal_members_give_zero(self):
        p = simplex(np.random.default_rng(16), 12)
        assert jsd([ProbField(p), ProbField(p.copy()), ProbField(p.copy())]) == 0.0

    def test_disjoint_supports_attain_log_n(self):
        for n in (2, 3, 4, 6):
            assert jsd(disjoint_set(n, width=3)) == pytest.approx(math.log(n), abs=1e-12)

    def test_two_member_direct_oracle(self):
        a = np.array([0.9, 0.1])
        b = np.array([0.1, 0.9])
        m = (a + b) / 2.0
        oracle = 0.5 * (
            sum(x * math.log(x / y) for x, y in zip(a, m))
            + sum(x * math.log(x / y) for x, y in zip(b, m))
        )
        got = jsd([ProbField(a), ProbField(b)])
        assert got == pytest.approx(oracle, abs=1e-15)
        assert got == pytest.approx(0.3680642071684971, abs=1e-15)
        assert 0.0 < got < math.log(2.0)

    def test_member_permutation_invariance(self):
        rng = np.random.default_rng(17)
        fields = [ProbField(simplex(rng, 10)) for _ in range(5)]
        base = jsd(fields)
        assert jsd(fields[::-1]) == pytest.approx(base, abs=1e-12)
        assert jsd([fields[2], fields[0], fields[4], fields[1], fields[3]]) == pytest.approx(
            base, abs=1e-12
        )

    def test_common_cell_permutation_invariance(self):
        rng = np.random.default_rng(18)
        rows = [simplex(rng, 11) for _ in range(3)]
        perm = rng.permutation(11)
        base = jsd([ProbField(r) for r in rows])
        shuffled = jsd([ProbField(r[perm]) for r in rows])
        assert shuffled == pytest.approx(base, abs=1e-12)


class TestJsdNormalized:
    def test_singleton_is_zero_by_definition(self):
        assert jsd_normalized([ProbField(np.array([0.25, 0.75]))]) == 0.0

    def test_identical_members_zero(self):
        p = simplex(np.random.default_rng(19), 6)
        assert jsd_normalized([ProbField(p), ProbField(p.copy())]) == 0.0

    def test_disjoint_supports_attain_one(self):
        for n in (2, 3, 5, 8):
            assert jsd_normalized(disjoint_set(n, width=2)) == pytest.approx(1.0, abs=1e-12)

    def test_overlapping_bumps_strictly_interior(self):
        cells = (np.arange(32) + 0.5) / 32
        a = np.exp(-((cells - 0.4) ** 2) / (2 * 0.1**2))
        b = np.exp(-((cells - 0.6) ** 2) / (2 * 0.1**2))
        v = jsd_normalized([ProbField(a / a.sum()), ProbField(b / b.sum())])
        assert 0.0 < v < 1.0


class TestEntropy:
    def test_delta_is_zero(self):
        assert entropy(ProbField.delta(8, 3)) == 0.0

    def test_uniform_attains_log_d(self):
        assert entropy(ProbField.uniform(4)) == pytest.approx(math.log(4.0), abs=1e-15)

    def test_direct_summation_oracle(self):
        p = ProbField(np.array([0.5, 0.25, 0.25]))
        assert entropy(p) == pytest.approx(1.5 * math.log(2.0), abs=1e-15)

    def test_normalized_extremes_and_ratio(self):
        assert entropy_normalized(ProbField.uniform(9)) == pytest.approx(1.0, abs=1e-15)
        assert entropy_normalized(ProbField.delta(9, 0)) == 0.0
        p = ProbField(np.array([0.5, 0.25, 0.25]))
        assert entropy_normalized(p) == pytest.approx(
            1.5 * math.log(2.0) / math.log(3.0), abs=1e-15
        )

    def test_dimension_one_is_flat_by_definition(self):
        assert entropy_normalized(ProbField(np.array([1.0]))) == 1.0


class TestValidation:
    def test_negative_entry_rejected(self):
        with pytest.raises(MalformedDistributionError):
            ProbField(np.array([1.2, -0.2]))

    def test_large_sum_deviation_rejected(self):
        with pytest.raises(MalformedDistributionError):
            ProbField(np.array([0.6, 0.6]))

    def test_small_sum_deviation_renormalized(self):
        p = ProbField(np.array([0.5004, 0.5001]))
        assert p.values.sum() == pytest.approx(1.0, abs=1e-15)

    def test_nonfinite_rejected(self):
        with pytest.raises(MalformedDistributionError):
            ProbField(np.array([np.nan, 1.0]))
        with pytest.raises(MalformedDistributionError):
            ProbField(np.array([np.inf, 0.0]))

    def test_values_are_read_only(self):
        p = ProbField(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            p.values[0] = 0.9

    def test_two_dimensional_input_rejected(self):
        with pytest.raises(MalformedDistributionError):
            ProbField(np.ones((2, 2)) / 4.0)

    def test_set_requires_equal_dimensions(self):
        with pytest.raises(DimensionMismatchError):
            DistributionSet((ProbField.uniform(3), ProbField.uniform(4)))

    def test_empty_set_rejected(self):
        with pytest.raises(MalformedDistributionError):
            DistributionSet(())


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 8),
    d=st.integers(2, 64),
)
def test_bounds_hold_on_random_sets(seed, n, d):
    rng = np.random.default_rng(seed)
    fields = [ProbField(simplex(rng, d)) for _ in range(n)]
    v = jsd(fields)
    assert 0.0 <= v <= math.log(max(n, 2)) + 1e-9
    if n >= 2:
        assert v <= math.log(n) + 1e-9
    assert 0.0 <= jsd_normalized(fields) <= 1.0
    h = entropy(fields[0])
    assert 0.0 <= h <= math.log(d) + 1e-9
    assert 0.0 <= entropy_normalized(fields[0]) <= 1.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 48))
def test_entropy_maximum_only_near_uniform(seed, d):
    rng = np.random.default_rng(seed)
    p = simplex(rng, d)
    if np.max(np.abs(p - 1.0 / d)) >= 1e-3:
        assert entropy(ProbField(p)) < math.log(d) - 1e-8


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6), d=st.integers(2, 32))
def test_near_equal_members_have_negligible_divergence(seed, n, d):
    # members jittered by <= 1e-7 around a floor-bounded base stay unresolvable
    rng = np.random.default_rng(seed)
    base = 0.5 * simplex(rng, d) + 0.5 / d
    fields = []
    for _ in range(n):
        bumped = base + rng.uniform(-1e-7, 1e-7, size=d)
        fields.append(ProbField(bumped / bumped.sum()))
    assert jsd(fields) < 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 32))
def test_separated_members_have_visible_divergence(seed, d):
    # any pair with total-variation distance >= 1e-2 is resolvable at 1e-9
    rng = np.random.default_rng(seed)
    a = simplex(rng, d)
    b = simplex(rng, d)
    if 0.5 * np.abs(a - b).sum() >= 1e-2:
        assert jsd([ProbField(a), ProbField(b)]) > 1e-9
