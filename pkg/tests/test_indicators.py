import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from evidencekit.errors import DegenerateVarianceError, DomainError, InsufficientDataError
from evidencekit.indicators import (IndicatorMatrix, SoftmaxTensor, accuracies,
                                    chi_square_independence, committee_predict,
                                    correlation_report, entropy_binned_correlation, entropy_bins,
                                    error_correlation, mean_pairwise_correlation,
                                    pairwise_correlations)


def matrix(rows):
    return IndicatorMatrix(np.array(rows, dtype=np.uint8))


binary = arrays(np.uint8, st.tuples(st.integers(4, 60), st.integers(2, 5)), elements=st.integers(0, 1))


class TestIndicatorMatrix:
    def test_validation(self):
        with pytest.raises(DomainError):
            IndicatorMatrix(np.array([[0, 2]]))
        with pytest.raises(DomainError):
            IndicatorMatrix(np.zeros((0, 2)))
        with pytest.raises(DomainError):
            IndicatorMatrix(np.zeros((2, 2)), ("a",))

    def test_read_only(self):
        m = matrix([[0, 1]])
        with pytest.raises(ValueError):
            m.values[0, 0] = 1


class TestErrorCorrelation:
    def test_identical(self):
        assert error_correlation(matrix([[0, 0], [1, 1], [0, 0], [1, 1]]), 0, 1) == 1.0

    def test_complementary(self):
        assert error_correlation(matrix([[0, 1], [1, 0], [0, 1], [1, 0]]), 0, 1) == -1.0

    def test_hand_value(self):
        m = matrix([[0, 0], [0, 1], [1, 1], [1, 1]])
        assert error_correlation(m, 0, 1) == pytest.approx(1 / math.sqrt(3), rel=1e-12)
        assert round(error_correlation(m, 0, 1), 4) == 0.5774

    def test_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            error_correlation(matrix([[0, 1], [0, 0], [0, 1]]), 0, 1)

    @settings(max_examples=60)
    @given(binary, st.randoms(use_true_random=False))
    def test_symmetric_and_permutation_invariant(self, values, rnd):
        m = IndicatorMatrix(values)
        try:
            r = error_correlation(m, 0, 1)
        except DegenerateVarianceError:
            return
        assert error_correlation(m, 1, 0) == r
        perm = list(range(values.shape[0]))
        rnd.shuffle(perm)
        assert error_correlation(IndicatorMatrix(values[perm]), 0, 1) == pytest.approx(r, abs=1e-12)
        assert r == pytest.approx(np.corrcoef(values[:, 0], values[:, 1])[0, 1], abs=1e-12)

    def test_mean_pairwise(self):
        col = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
        m = IndicatorMatrix(np.stack([col] * 4, axis=1))
        assert mean_pairwise_correlation(m) == 1.0
        m2 = matrix([[0, 0], [0, 1], [1, 1], [1, 1]])
        assert mean_pairwise_correlation(m2) == error_correlation(m2, 0, 1)
        rho = pairwise_correlations(m)
        assert np.array_equal(rho, rho.T) and np.all(np.diag(rho) == 1.0)


class TestChiSquare:
    def test_product_table(self):
        rows = [[1, 1]] * 1 + [[1, 0]] * 9 + [[0, 1]] * 9 + [[0, 0]] * 81
        res = chi_square_independence(matrix(rows), 0, 1, 0.05)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0)
        assert not res.reject_independence

    def test_identical_columns(self):
        rows = [[1, 1]] * 50 + [[0, 0]] * 50
        res = chi_square_independence(matrix(rows), 0, 1, 0.05)
        assert res.statistic == pytest.approx(100.0, rel=1e-12)
        assert res.p_value == pytest.approx(1.5e-23, rel=0.05)
        assert res.reject_independence

    def test_zero_marginal(self):
        with pytest.raises(InsufficientDataError, match="larger sample"):
            chi_square_independence(matrix([[0, 1], [0, 0]]), 0, 1, 0.05)

    @settings(max_examples=100)
    @given(binary)
    def test_identity_with_phi(self, values):
        m = IndicatorMatrix(values)
        try:
            rho = error_correlation(m, 0, 1)
        except DegenerateVarianceError:
            return
        stat = chi_square_independence(m, 0, 1, 0.05).statistic
        assert stat == pytest.approx(values.shape[0] * rho * rho, rel=1e-9, abs=1e-12)

    def test_against_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(5)
        m = IndicatorMatrix((rng.random((400, 2)) < [0.2, 0.3]).astype(np.uint8))
        a, b = m.column(0), m.column(1)
        table = [[np.sum(a & b), np.sum(a & ~b & 1)], [np.sum(~a & b & 1), np.sum((1 - a) & (1 - b))]]
        ref = stats.chi2_contingency(table, correction=False)
        res = chi_square_independence(m, 0, 1, 0.05)
        assert res.statistic == pytest.approx(ref[0], rel=1e-9)
        assert res.p_value == pytest.approx(ref[1], rel=1e-9)


class TestAccuracies:
    def test_all_correct(self):
        assert accuracies(matrix([[0, 0, 0]] * 3)) == (1.0, 1.0)

    def test_hand_example(self):
        avg, joint = accuracies(matrix([[1, 1], [1, 0], [0, 0]]))
        assert avg == pytest.approx(0.5)
        assert joint == pytest.approx(2 / 3)

    @given(binary)
    def test_ordering(self, values):
        avg, joint = accuracies(IndicatorMatrix(values))
        per_model = 1 - values.mean(axis=0)
        assert joint >= avg - 1e-12
        assert avg >= per_model.min() - 1e-12


def softmax_from(probs, labels):
    return SoftmaxTensor(np.asarray(probs, dtype=float), np.asarray(labels))


class TestSoftmaxTensor:
    def test_validation(self):
        with pytest.raises(DomainError):
            softmax_from([[[0.6, 0.5]]], [0])
        with pytest.raises(DomainError):
            softmax_from([[[1.0]]], [0])
        with pytest.raises(DomainError):
            softmax_from([[[0.5, 0.5]]], [2])

    def test_entropy_zero_convention(self):
        s = softmax_from([[[1.0, 0.0], [0.5, 0.5]]], [0])
        assert s.entropies()[0].tolist() == pytest.approx([0.0, math.log(2)])


class TestCommittee:
    def test_single_member(self, rng):
        p = rng.dirichlet(np.ones(4), size=(30, 2))
        s = softmax_from(p, rng.integers(0, 4, 30))
        pred, _ = committee_predict(s, [1])
        assert np.array_equal(pred, s.predictions()[:, 1])

    def test_hand_example(self):
        s = softmax_from([[[0.6, 0.4], [0.1, 0.9]]], [0])
        pred, err = committee_predict(s)
        assert pred.tolist() == [1] and err.tolist() == [1]

    def test_tie(self):
        s = softmax_from([[[0.5, 0.5], [0.5, 0.5]]], [1])
        assert committee_predict(s)[0].tolist() == [0]

    def test_identical_members(self, rng):
        p = rng.dirichlet(np.ones(3), size=20)
        s = softmax_from(np.stack([p, p, p], axis=1), rng.integers(0, 3, 20))
        assert np.array_equal(committee_predict(s)[0], p.argmax(axis=1))

    def test_empty(self):
        with pytest.raises(DomainError):
            committee_predict(softmax_from([[[0.5, 0.5]]], [0]), [])


def structured_tensor(rng, n=10_000):
    """Low-entropy half with shared errors, high-entropy half with independent errors."""
    half = n // 2
    labels = np.zeros(n, dtype=int)
    probs = np.empty((n, 2, 2))
    shared = rng.random(half) < 0.3
    confident = np.where(shared, 0.01, 0.99)          # P(correct class) for both members
    probs[:half, :, 0] = confident[:, None]
    for m in range(2):
        wrong = rng.random(n - half) < 0.3
        probs[half:, m, 0] = np.where(wrong, 0.45, 0.55)
    probs[..., 1] = 1 - probs[..., 0]
    return SoftmaxTensor(probs, labels)


class TestEntropyBins:
    def test_single_bin_is_global(self, rng):
        s = structured_tensor(rng, 2000)
        (b,) = entropy_binned_correlation(s, 0, 1, 1)
        assert b.rho == pytest.approx(error_correlation(s.indicators(), 0, 1), rel=1e-12)

    def test_structure(self, rng):
        bins = entropy_binned_correlation(structured_tensor(rng), 0, 1, 2)
        assert bins[0].rho == pytest.approx(1.0)
        assert abs(bins[-1].rho) < 0.05

    def test_partition_and_sizes(self, rng):
        p = rng.dirichlet(np.ones(3), size=(103, 2))
        s = softmax_from(p, rng.integers(0, 3, 103))
        groups = entropy_bins(s, 0, 1, 8)
        assert [g.size for g in groups] == [13] * 7 + [12]
        assert sorted(np.concatenate(groups).tolist()) == list(range(103))
        h = s.entropies().sum(axis=1)
        flat = np.concatenate(groups)
        assert np.all(np.diff(h[flat]) >= 0)

    def test_stable_ties(self):
        p = np.full((10, 2, 2), 0.5)
        s = softmax_from(p, np.zeros(10, dtype=int))
        assert np.concatenate(entropy_bins(s, 0, 1, 3)).tolist() == list(range(10))

    def test_degenerate_bin_flagged(self):
        p = np.tile([0.9, 0.1], (8, 2, 1))
        s = softmax_from(p, np.zeros(8, dtype=int))
        bins = entropy_binned_correlation(s, 0, 1, 2)
        assert all(b.degenerate and b.rho is None for b in bins)

    def test_domain(self, rng):
        s = softmax_from(rng.dirichlet(np.ones(2), size=(3, 2)), [0, 1, 0])
        with pytest.raises(DomainError):
            entropy_bins(s, 0, 1, 4)
        with pytest.raises(DomainError):
            entropy_bins(s, 0, 1, 0)


def test_report_handles_degenerate_pairs():
    m = IndicatorMatrix(np.array([[0, 1, 1], [0, 0, 1], [0, 1, 0], [0, 0, 0]], dtype=np.uint8))
    d = correlation_report(m).to_dict()
    assert d["pairwise_rho"][0][1] is None
    assert d["chi2"][0] == {"i": 0, "j": 1, "stat": None, "p": None, "reject": None}
    assert d["mean_rho"] == pytest.approx(0.0)
