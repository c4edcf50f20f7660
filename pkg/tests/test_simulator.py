import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evidencekit.errors import DomainError, InfeasibleError
from evidencekit.indicators import chi_square_independence, mean_pairwise_correlation
from evidencekit.kofn import empirical_k_of_n, theoretical_k_of_n
from evidencekit.redundancy import pair_failure_probability, triple_failure_probability_approx
from evidencekit.simulator import (CommonShockSpec, calibrate_common_shock, joint_table,
                                   sample_ensemble, sample_pair)


def closed_form_theta(p, rho):
    return rho * p / ((1 - p) + rho * p)


class TestCalibration:
    def test_independent(self):
        assert calibrate_common_shock(0.2, 0.0) == (0.0, 0.2)

    def test_comonotone_limit(self):
        theta, q = calibrate_common_shock(0.1, 1 - 1e-9)
        assert theta == pytest.approx(0.1, abs=1e-8) and q < 1e-8

    def test_known_point(self):
        theta, q = calibrate_common_shock(0.1, 0.5)
        assert theta == pytest.approx(1 / 19, abs=1e-14)
        assert q == pytest.approx(0.05, abs=1e-14)
        assert theta + (1 - theta) * q - 0.1 == pytest.approx(0, abs=1e-12)
        assert theta + (1 - theta) * q * q - (0.5 * 0.09 + 0.01) == pytest.approx(0, abs=1e-12)

    @given(p=st.floats(1e-6, 0.99), rho=st.floats(0, 0.999))
    def test_against_closed_form(self, p, rho):
        theta, q = calibrate_common_shock(p, rho)
        assert theta == pytest.approx(closed_form_theta(p, rho), rel=1e-9, abs=1e-15)
        assert 0 <= theta <= p and 0 <= q <= p + 1e-15
        spec = CommonShockSpec(p, rho, 3, theta, q)
        assert spec.marginal() == pytest.approx(p, rel=1e-12)
        assert spec.implied_rho() == pytest.approx(rho, abs=1e-10)

    @pytest.mark.parametrize("p,rho", [(0.0, 0.1), (1.0, 0.1), (0.1, 1.0), (0.1, -0.2)])
    def test_domain(self, p, rho):
        with pytest.raises(DomainError):
            calibrate_common_shock(p, rho)

    def test_member_count(self):
        with pytest.raises(DomainError):
            CommonShockSpec.calibrate(0.1, 0.1, 1)


class TestJointTable:
    @given(p1=st.floats(1e-4, 0.9), p2=st.floats(1e-4, 0.9), u=st.floats(0, 1))
    def test_cells(self, p1, p2, u):
        s = math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
        lo = (max(0, p1 + p2 - 1) - p1 * p2) / s
        hi = (min(p1, p2) - p1 * p2) / s
        rho = max(-1.0, min(1.0, lo + u * (hi - lo)))
        try:
            cells = joint_table(p1, p2, rho)
        except InfeasibleError:
            return
        assert all(c >= 0 for c in cells)
        assert math.fsum(cells) == pytest.approx(1.0, abs=1e-12)

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            sample_pair(0.01, 0.5, 0.9, 10)


class TestSamplePair:
    def test_independent_pair(self):
        m = sample_pair(1e-2, 1e-2, 0.0, 10**6, seed=11)
        rate = float(m.values.all(axis=1).mean())
        assert abs(rate - 1e-4) <= 3 * math.sqrt(1e-4 / 1e6)

    def test_marginals(self):
        n = 10**6
        m = sample_pair(0.05, 0.2, 0.3, n, seed=12)
        for col, p in zip(m.values.T, (0.05, 0.2)):
            assert abs(col.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_negative_correlation(self):
        m = sample_pair(0.3, 0.3, -0.2, 200_000, seed=13)
        assert mean_pairwise_correlation(m) == pytest.approx(-0.2, abs=0.015)

    def test_deterministic_and_job_invariant(self):
        a = sample_pair(0.1, 0.1, 0.2, 700_000, seed=5)
        b = sample_pair(0.1, 0.1, 0.2, 700_000, seed=5, jobs=3)
        assert a == b
        assert a != sample_pair(0.1, 0.1, 0.2, 700_000, seed=6)


class TestSampleEnsemble:
    def test_size_of_independence_test(self):
        spec = CommonShockSpec.calibrate(0.1, 0.0, 2)
        kept = 0
        for seed in range(1000, 1100):
            m = sample_ensemble(spec, 5000, seed=seed)
            kept += not chi_square_independence(m, 0, 1, 0.05).reject_independence
        assert kept >= 94

    @pytest.mark.slow
    def test_size_of_independence_test_many_replications(self):
        # about a quarter of 100-replication blocks fall below 94 by chance alone,
        # so also check the rejection rate itself on a larger run
        spec = CommonShockSpec.calibrate(0.1, 0.0, 2)
        reps = 4000
        rejected = sum(chi_square_independence(sample_ensemble(spec, 5000, seed=s), 0, 1, 0.05)
                       .reject_independence for s in range(reps))
        assert abs(rejected / reps - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / reps)

    def test_k_of_n_under_independence(self):
        n_samples = 10**6
        m = sample_ensemble(CommonShockSpec.calibrate(0.0755, 0.0, 5), n_samples, seed=21)
        for k in range(1, 6):
            t = theoretical_k_of_n(0.0755, 5, k)
            assert abs(empirical_k_of_n(m, k) - t) <= 4 * math.sqrt(t * (1 - t) / n_samples) + 1e-12

    def test_calibration_closes_loop(self):
        m = sample_ensemble(CommonShockSpec.calibrate(0.1, 0.3, 5), 10**5, seed=22)
        assert mean_pairwise_correlation(m) == pytest.approx(0.3, abs=0.02)

    def test_deterministic_and_job_invariant(self):
        spec = CommonShockSpec.calibrate(0.2, 0.1, 4)
        a = sample_ensemble(spec, 600_000, seed=9)
        assert a == sample_ensemble(spec, 600_000, seed=9, jobs=4)

    @pytest.mark.parametrize("p", [1e-3, 5e-4])
    @pytest.mark.parametrize("rho", [0.01, 0.04])
    def test_triple_failure_bracket(self, p, rho):
        spec = CommonShockSpec.calibrate(p, rho, 3)
        n_samples = 10**7
        m = sample_ensemble(spec, n_samples, seed=31)
        empirical = float(m.values.all(axis=1).mean())
        rho_12_3 = spec.pair_triple_rho()
        lead = triple_failure_probability_approx(p, rho, rho_12_3)
        fuller = triple_failure_probability_approx(p, rho, rho_12_3, leading_order=False)
        approx_error = abs(fuller - lead)
        sigma = math.sqrt(spec.joint(3) / n_samples)
        assert abs(empirical - lead) <= approx_error + 4 * sigma
        # the fuller form is the exact all-fail probability up to the pair approximation
        assert fuller == pytest.approx(spec.joint(3), rel=2 * p)

    def test_rejects_bad_size(self):
        with pytest.raises(DomainError):
            sample_ensemble(CommonShockSpec.calibrate(0.1, 0.1, 3), 0)
