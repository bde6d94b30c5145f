import numpy as np
import pytest

from smoothopt.core import (
    ContractViolationError,
    RngStream,
    sample_gaussian,
    softmax_weights,
)


class TestSoftmaxWeights:
    def test_equal_costs_give_uniform(self):
        w = softmax_weights([5.0, 5.0, 5.0], 1.0)
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_two_to_one_ratio(self):
        # exp(0) : exp(-ln 2) = 2 : 1 at lambda = 2
        w = softmax_weights([0.0, 2 * np.log(2.0)], 2.0)
        np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-14)

    def test_shift_invariance_large_offset(self):
        w = softmax_weights([1000.0, 1000.0 + 2 * np.log(2.0)], 2.0)
        np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-12)

    def test_shift_invariance_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            costs = rng.normal(size=12) * rng.uniform(0.1, 100)
            shift = rng.uniform(-1e6, 1e6)
            w0 = softmax_weights(costs, 3.7)
            w1 = softmax_weights(costs + shift, 3.7)
            np.testing.assert_allclose(w0, w1, atol=1e-12)
            assert abs(w0.sum() - 1.0) <= 1e-12

    def test_permutation_roundtrip(self):
        rng = np.random.default_rng(11)
        costs = rng.normal(size=20)
        perm = rng.permutation(20)
        inv = np.argsort(perm)
        w = softmax_weights(costs, 0.7)
        w_perm = softmax_weights(costs[perm], 0.7)
        np.testing.assert_allclose(w_perm[inv], w, atol=1e-15)

    def test_limits(self):
        rng = np.random.default_rng(3)
        costs = rng.uniform(0, 5, size=64)
        spread = costs.max() - costs.min()
        w_hot = softmax_weights(costs, 1e9 * spread)
        assert np.max(np.abs(w_hot - 1.0 / 64)) < 1e-6
        # moderate argmin margin: dominant but not yet degenerate weight
        costs_mid = costs.copy()
        costs_mid[10] = costs.min() - spread / 10
        r = costs_mid.max() - costs_mid.min()
        assert softmax_weights(costs_mid, r / 50)[10] > 0.5
        # margin >= 0.6 * range makes the argmin weight exceed 1 - 1e-9 at
        # lambda = range / 50 (63 competitors * exp(-30) < 1e-9)
        costs_cold = rng.uniform(3.2, 5.0, size=64)
        costs_cold[10] = 0.0
        r = costs_cold.max() - costs_cold.min()
        assert softmax_weights(costs_cold, r / 50)[10] > 1 - 1e-9

    def test_infinite_lambda_exactly_uniform(self):
        w = softmax_weights([3.0, -1.0, 40.0], np.inf)
        assert np.all(w == w[0])

    def test_contract_violations(self):
        with pytest.raises(ContractViolationError):
            softmax_weights([], 1.0)
        with pytest.raises(ContractViolationError):
            softmax_weights([1.0, np.nan], 1.0)
        with pytest.raises(ContractViolationError):
            softmax_weights([1.0, np.inf], 1.0)
        with pytest.raises(ContractViolationError):
            softmax_weights([1.0, 2.0], 0.0)
        with pytest.raises(ContractViolationError):
            softmax_weights([1.0, 2.0], -1.0)


class TestSampleGaussian:
    def test_law_of_large_numbers(self):
        y = sample_gaussian(np.zeros(2), 1.0, 100_000, RngStream(1234))
        assert np.all(np.abs(y.mean(axis=0)) < 0.02)
        assert np.all(np.abs(y.var(axis=0) - 1.0) < 0.05)

    def test_declared_variance(self):
        y = sample_gaussian([3.0, -1.0], 4.0, 100_000, RngStream(99))
        np.testing.assert_allclose(y.mean(axis=0), [3.0, -1.0], atol=0.05)
        assert np.all(np.abs(y.var(axis=0) - 4.0) < 0.2)

    def test_determinism_bit_identical(self):
        a = sample_gaussian(np.zeros(3), 2.0, 1000, RngStream(42, 0))
        b = sample_gaussian(np.zeros(3), 2.0, 1000, RngStream(42, 0))
        assert np.array_equal(a, b)

    def test_contract_violations(self):
        with pytest.raises(ContractViolationError):
            sample_gaussian(np.zeros(2), 0.0, 10, RngStream(0))
        with pytest.raises(ContractViolationError):
            sample_gaussian(np.zeros(2), -1.0, 10, RngStream(0))
        with pytest.raises(ContractViolationError):
            sample_gaussian(np.array([np.nan, 0.0]), 1.0, 10, RngStream(0))


class TestRngStream:
    def test_same_key_same_stream(self):
        g1 = RngStream(7, 5).generator()
        g2 = RngStream(7, 5).generator()
        assert np.array_equal(g1.standard_normal(64), g2.standard_normal(64))

    def test_distinct_streams_differ(self):
        a = RngStream(7, 5).generator().standard_normal(64)
        b = RngStream(7, 6).generator().standard_normal(64)
        c = RngStream(8, 5).generator().standard_normal(64)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_derive_is_stable_and_order_sensitive(self):
        base = RngStream(123)
        assert base.derive("probe", 3) == base.derive("probe", 3)
        assert base.derive("probe", 3) != base.derive(3, "probe")
        assert base.derive("a").seed == 123

    def test_derived_streams_are_decorrelated(self):
        base = RngStream(2024)
        xs = base.derive("left").generator().standard_normal(4096)
        ys = base.derive("right").generator().standard_normal(4096)
        assert abs(np.corrcoef(xs, ys)[0, 1]) < 0.05
