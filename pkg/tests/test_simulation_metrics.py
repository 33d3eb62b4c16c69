import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from silfs.errors import InvalidArgumentError
from silfs.metrics import MetricsReport, rand_index, rmse_metrics, selection_metrics
from silfs.simulation import (SeededStream, ar1_coefficients, collinearity_covariance, generate,
                              generate_collinearity_case, generate_scenario_ab, generate_toy)

from conftest import naive_rand_index


class TestSeededStream:
    def test_uniform_open_interval(self):
        u = SeededStream(0).uniform(size=100000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_normal_moments(self):
        z = SeededStream(1).normal(size=200000)
        assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01

    def test_reproducible(self):
        assert np.array_equal(SeededStream(7).normal(size=10), SeededStream(7).normal(size=10))


class TestScenarioAB:
    def test_deterministic(self):
        a, b = generate_scenario_ab("A", 3, 50, 20, seed=5), generate_scenario_ab("A", 3, 50, 20, seed=5)
        assert np.array_equal(a.dataset.design, b.dataset.design)
        assert np.array_equal(a.dataset.response, b.dataset.response)
        assert not np.array_equal(a.dataset.response,
                                  generate_scenario_ab("A", 3, 50, 20, seed=6).dataset.response)

    def test_label_proportions(self):
        for seed in range(20):
            sd = generate_scenario_ab("A", 3, 100, 50, seed=seed)
            share = np.mean(sd.true_labels == 1)
            assert abs(share - 0.5) <= 4 * np.sqrt(0.25 / 100)

    def test_labels_match_levels(self):
        sd = generate_scenario_ab("B", 5, 100, 50, seed=0)
        levels = np.array([-5.0, 0.0, 5.0])
        assert np.array_equal(sd.true_alpha, levels[sd.true_labels - 1])
        assert sd.K == 3

    def test_scenario_b_coefficients(self):
        sd = generate_scenario_ab("B", 5, 100, 50, seed=2)
        nz = sd.true_beta[sd.true_beta != 0]
        assert nz.size == 5
        assert np.all((nz > 0.8) & (nz < 1.0))
        assert np.all(sd.true_beta[5:] == 0)

    def test_factor_dimension(self):
        sd = generate_scenario_ab("A", 3, 40, 30, r=3, seed=0)
        assert sd.true_factors.shape == (40, 3)

    def test_transition_matrix(self):
        Phi = ar1_coefficients(3, literal=True)
        assert Phi[0, 0] == 0.5 and Phi[0, 1] == 0.3 and Phi[0, 2] == pytest.approx(0.09)
        assert np.max(np.abs(np.linalg.eigvals(ar1_coefficients(4)))) < 1.0

    def test_unknown_scenario(self):
        with pytest.raises(InvalidArgumentError):
            generate("C", 0)


class TestCollinearity:
    def test_uncorrelated_case(self):
        for seed in range(5):
            X = generate_collinearity_case(0, 500, 20, seed=seed).dataset.design
            C = np.cov(X, rowvar=False)
            assert np.max(np.abs(C - np.diag(np.diag(C)))) <= 0.5

    def test_constructed_spectrum(self):
        _, Lam = collinearity_covariance(3, 30, SeededStream(0))
        ev = np.sort(np.linalg.eigvalsh(Lam))[::-1]
        assert np.allclose(ev[:3], 26.0) and np.allclose(ev[3:], 1.0)

    def test_too_many_spikes(self):
        with pytest.raises(InvalidArgumentError):
            generate_collinearity_case(21, 50, 20)

    def test_deterministic(self):
        a, b = generate_collinearity_case(5, 60, 30, 3), generate_collinearity_case(5, 60, 30, 3)
        assert np.array_equal(a.dataset.design, b.dataset.design)

    def test_truth(self):
        sd = generate_collinearity_case(4, 100, 40, 1)
        assert set(np.unique(sd.true_alpha)) <= {-3.0, 3.0}
        nz = sd.true_beta[:10]
        assert np.all((nz > 1) & (nz < 2)) and np.all(sd.true_beta[10:] == 0)


class TestToy:
    def test_independent_columns(self):
        X = generate_toy(0.0, 2000, 10, seed=0).dataset.design
        C = np.cov(X, rowvar=False)
        assert np.max(np.abs(C - np.eye(10))) <= 0.1

    def test_spiked_regime(self):
        X = generate_toy(0.9, 100, 100, seed=0).dataset.design
        ev = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False)))[::-1]
        assert ev[0] > 10 * ev[1]

    def test_rho_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            generate_toy(0.99)

    def test_deterministic(self):
        assert np.array_equal(generate_toy(0.5, seed=2).dataset.response,
                              generate_toy(0.5, seed=2).dataset.response)


class TestRandIndex:
    def test_relabelling(self):
        assert rand_index([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0

    def test_crossed_pairs(self):
        assert rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(1 / 3)

    def test_singletons_vs_single_cluster(self):
        assert rand_index([1, 2, 3], [1, 1, 1]) == 0.0

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            rand_index([1], [1])

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            rand_index([1, 2], [1, 2, 3])

    def test_naive_oracle(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 11))
            a, b = rng.integers(1, 4, n), rng.integers(1, 4, n)
            assert rand_index(a, b) == pytest.approx(naive_rand_index(a, b), abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=2, max_size=30),
           st.permutations([1, 2, 3, 4]))
    def test_properties(self, pairs, perm):
        a = [x for x, _ in pairs]
        b = [y for _, y in pairs]
        ri = rand_index(a, b)
        assert 0.0 <= ri <= 1.0
        assert ri == rand_index(b, a)
        assert ri == rand_index([perm[x - 1] for x in a], b)
        same = all((a[i] == a[j]) == (b[i] == b[j])
                   for i, j in itertools.combinations(range(len(a)), 2))
        assert (ri == 1.0) == same


def rep(alpha, beta):
    return SimpleNamespace(alpha_hat=np.asarray(alpha, float), beta_hat=np.asarray(beta, float))


def truth(alpha, beta):
    return SimpleNamespace(true_alpha=np.asarray(alpha, float), true_beta=np.asarray(beta, float))


class TestRmse:
    def test_exact(self):
        assert rmse_metrics([rep([1, 2], [0, 3])], [truth([1, 2], [0, 3])]) == (0.0, 0.0)

    def test_unit_error(self):
        _, rb = rmse_metrics([rep([0], [1, 0, 0, 0])], [truth([0], [0, 0, 0, 0])])
        assert rb == pytest.approx(0.5)

    def test_homogeneity(self, rng):
        ta, tb = rng.normal(size=5), rng.normal(size=4)
        ea, eb = rng.normal(size=5), rng.normal(size=4)
        one = rmse_metrics([rep(ta + ea, tb + eb)], [truth(ta, tb)])
        two = rmse_metrics([rep(ta + 2 * ea, tb + 2 * eb)], [truth(ta, tb)])
        assert two == pytest.approx((2 * one[0], 2 * one[1]))

    def test_pooled(self):
        ra, rb = rmse_metrics([rep([0], [1, 0]), rep([0], [0, 0])],
                              [truth([0], [0, 0]), truth([0], [0, 0])])
        assert rb == pytest.approx(0.5)

    def test_misaligned(self):
        with pytest.raises(InvalidArgumentError):
            rmse_metrics([rep([0], [0])], [])


class TestSelectionMetrics:
    def test_exact_support(self):
        b = np.array([1.0, 0, 2.0, 0])
        assert tuple(selection_metrics(b, b)) == (1.0, 1.0)

    def test_empty_estimate(self):
        t = np.zeros(50)
        t[:5] = 1
        assert tuple(selection_metrics(np.zeros(50), t)) == (0.0, 1.0)

    def test_counting(self):
        t, e = np.zeros(50), np.zeros(50)
        t[:5] = 1
        e[[0, 1, 2, 3, 5]] = 1
        s = selection_metrics(e, t)
        assert s.sensitivity == pytest.approx(0.8)
        assert s.specificity == pytest.approx(44 / 45)

    def test_threshold(self):
        t = np.array([1.0, 0.0])
        assert selection_metrics(np.array([1.0, 1e-12]), t).specificity == 1.0

    def test_degenerate_truth_flagged(self):
        s = selection_metrics(np.zeros(3), np.zeros(3))
        assert s.sensitivity == 1.0 and s.degenerate

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=20))
    def test_in_unit_interval(self, pairs):
        e = np.array([x for x, _ in pairs])
        t = np.array([y for _, y in pairs])
        s = selection_metrics(e, t)
        assert 0 <= s.sensitivity <= 1 and 0 <= s.specificity <= 1


def test_metrics_report_frequency_format():
    r = MetricsReport("SILFS-l2", 20, 0.1, 0.1, 0.99, 1.0, 0.98, 2.1, 2, 0, 10.0)
    assert r.freq == "2|0"
    assert r.to_dict()["freq"] == "2|0"
