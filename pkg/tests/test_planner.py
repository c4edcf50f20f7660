import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from evidencekit import planner
from evidencekit.errors import DomainError, FormatError
from evidencekit.planner import (CampaignAssumptions, binomial_test, exceedance_probability,
                                 frame_requirement, parse_assumptions, poisson_sample_size,
                                 statistical_factor, zero_failure_sample_size)


def exact_tail(n, k, p):
    """P(X > k) for X ~ B(n, p) in rational arithmetic."""
    p = Fraction(p)
    return sum(math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(k + 1, n + 1))


LOWER = CampaignAssumptions(2.5e11, 10, 0.05, 10, 0.5, 5, 9.19)
UPPER = CampaignAssumptions(2.5e12, 1, 1e-4, 100, 0.1, 90, 15)


class TestStatisticalFactor:
    def test_values(self):
        assert statistical_factor(0.05) == pytest.approx(2.995732273553991, rel=1e-15)
        assert round(statistical_factor(1e-4), 4) == 9.2103

    def test_limit_near_one(self):
        assert 0 < statistical_factor(1 - 1e-12) < 1.1e-12

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 2.0, math.nan])
    def test_domain(self, alpha):
        with pytest.raises(DomainError):
            statistical_factor(alpha)


class TestBinomialTest:
    def test_accepts_three_million(self):
        d = binomial_test(3_000_000, 0, 1e-6, 0.05)
        assert d.accept_h1
        assert d.attained_confidence == pytest.approx(1 - math.exp(-3.0) * math.exp(-1.5e-6), rel=1e-9)

    def test_rejects_two_point_nine_million(self):
        d = binomial_test(2_900_000, 0, 1e-6, 0.05)
        assert not d.accept_h1
        assert 1 - d.attained_confidence == pytest.approx(0.0550, abs=1e-4)

    @pytest.mark.parametrize("n", [1, 7, 1000, 10**12])
    def test_all_failures_rejects(self, n):
        d = binomial_test(n, n, 0.3, 0.05)
        assert d.attained_confidence == 0.0 and not d.accept_h1

    @pytest.mark.parametrize("n", range(0, 31, 3))
    @pytest.mark.parametrize("p", [0.01, 0.1, 0.37, 0.5, 0.9])
    def test_against_rational_oracle(self, n, p):
        for k in range(0, n + 1):
            exact = float(exact_tail(n, k, p))
            got = exceedance_probability(n, k, p)
            if exact == 0.0:
                assert got == 0.0
            else:
                assert got == pytest.approx(exact, rel=1e-12, abs=1e-300)

    def test_large_n_against_scipy(self):
        stats = pytest.importorskip("scipy.stats")
        for n, k, p in [(10**9, 1000, 1e-6), (10**9, 950, 1e-6), (10**12, 5, 1e-11),
                        (10**17, 0, 1e-17), (10**16, 30, 2e-15), (5000, 2500, 0.5)]:
            assert exceedance_probability(n, k, p) == pytest.approx(stats.binom.sf(k, n, p), rel=1e-9)

    def test_no_underflow_at_huge_n(self):
        d = binomial_test(10**17, 10, 1e-16, 0.05)
        assert 0.0 < d.attained_confidence <= 1.0

    @pytest.mark.parametrize("args", [(5, 6, 0.1, 0.05), (-1, 0, 0.1, 0.05), (5, 0, 0.0, 0.05),
                                      (5, 0, 0.1, 1.0), (10**19, 0, 0.1, 0.05)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            binomial_test(*args)


class TestZeroFailureSampleSize:
    def test_one_in_a_million(self):
        # exact ceil(ln 0.05 / ln(1 - 1e-6))
        assert zero_failure_sample_size(1e-6, 0.05) == 2_995_731

    def test_half_half(self):
        assert zero_failure_sample_size(0.5, 0.5) == 1

    def test_campaign_scale(self):
        n = zero_failure_sample_size(2e-10, 0.05)
        assert n == 14_978_661_367
        assert n == pytest.approx(-math.log(0.05) / 2e-10, rel=1e-9)

    @pytest.mark.parametrize("p_tol", [10.0**-e for e in range(3, 10)])
    @pytest.mark.parametrize("alpha", [0.05, 0.01, 1e-4])
    def test_consistent_with_binomial_test(self, p_tol, alpha):
        n = zero_failure_sample_size(p_tol, alpha)
        assert binomial_test(n, 0, p_tol, alpha).accept_h1
        assert not binomial_test(n - 1, 0, p_tol, alpha).accept_h1

    def test_overflow(self):
        with pytest.raises(OverflowError):
            zero_failure_sample_size(1e-19, 0.05)

    @pytest.mark.parametrize("p_tol", [1e-6, 1e-8, 1e-12])
    def test_poisson_cross_check(self, p_tol):
        exact = zero_failure_sample_size(p_tol, 0.05)
        assert abs(exact - poisson_sample_size(p_tol, 0.05)) / exact < 1e-6


class TestFrameRequirement:
    def test_lower_column(self):
        r = frame_requirement(LOWER)
        assert r.frames_final == pytest.approx(1.50e12, rel=0.01)
        assert r.cost_per_frame == pytest.approx(0.7658, abs=1e-4)
        assert r.total_cost == pytest.approx(1.147e12, rel=0.01)

    def test_lower_column_published_rounding(self):
        r = frame_requirement(LOWER, paper_mode=True)
        assert r.cost_per_frame == 0.775
        assert r.exact_cost_per_frame == pytest.approx(0.76583, abs=1e-5)
        assert r.total_cost == pytest.approx(1.16e12, rel=0.01)

    def test_upper_column(self):
        r = frame_requirement(UPPER, paper_mode=True)
        assert r.frames_final == pytest.approx(2.30e16, rel=0.01)
        assert r.total_cost == pytest.approx(5.18e17, rel=0.01)

    def test_identity_pipeline(self):
        a = CampaignAssumptions(1e9, 1, math.exp(-1), 1, 1, 1, 60)
        r = frame_requirement(a)
        assert r.frames_final == pytest.approx(1e9, rel=1e-15)
        assert r.total_cost == pytest.approx(1e9, rel=1e-15)

    def test_closed_form(self):
        r = frame_requirement(UPPER)
        expected = 2.5e12 / 1 * statistical_factor(1e-4) * 100 / 0.1
        assert r.frames_final == pytest.approx(expected, rel=1e-15)
        assert r.total_cost == pytest.approx(r.frames_final * r.cost_per_frame, rel=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(
        meters=st.floats(1e8, 1e13), frame=st.floats(0.1, 100), alpha=st.floats(1e-6, 0.3),
        safety=st.floats(1, 1000), fraction=st.floats(0.01, 1), scale=st.floats(1.01, 10),
    )
    def test_monotone(self, meters, frame, alpha, safety, fraction, scale):
        base = CampaignAssumptions(meters, frame, alpha, safety, fraction, 5, 10)
        f0 = frame_requirement(base).frames_final

        def final(**kw):
            d = dict(base.__dict__, **kw)
            return frame_requirement(CampaignAssumptions(**d)).frames_final

        assert final(meters_per_fatality=meters * scale) >= f0
        assert final(robot_safety_factor=safety * scale) >= f0
        assert final(perception_risk_fraction=fraction / scale) >= f0
        assert final(meters_per_frame=frame * scale) <= f0
        assert final(alpha=min(0.99, alpha * scale)) <= f0

    @settings(max_examples=40, deadline=None)
    @given(alpha=st.floats(1e-9, 0.36), safety=st.floats(1, 1e3), fraction=st.floats(1e-3, 1))
    def test_stages_nondecreasing_below_inverse_e(self, alpha, safety, fraction):
        r = frame_requirement(CampaignAssumptions(1e10, 1, alpha, safety, fraction, 1, 1))
        assert r.base_frames <= r.frames_after_statistics <= r.frames_after_safety <= r.frames_final

    @pytest.mark.parametrize("field,value", [("alpha", 1.0), ("perception_risk_fraction", 1.5),
                                             ("hourly_wage", 0.0), ("meters_per_frame", -1.0)])
    def test_invalid_assumptions(self, field, value):
        d = dict(LOWER.__dict__)
        d[field] = value
        with pytest.raises(DomainError):
            CampaignAssumptions(**d)


class TestAssumptionFiles:
    TEXT = """# comment line
meters_per_fatality = 2.5e11
meters_per_frame = 10   # trailing comment
alpha = 0.05
robot_safety_factor = 10
perception_risk_fraction = 1/2
minutes_per_frame_label = 5
hourly_wage = 9.19
"""

    def test_parse(self):
        assert parse_assumptions(self.TEXT) == LOWER

    def test_round_trip(self):
        assert parse_assumptions(planner.format_assumptions(UPPER)) == UPPER

    def test_override_wins(self):
        a = parse_assumptions(self.TEXT, {"alpha": 1e-3, "hourly_wage": None})
        assert a.alpha == 1e-3 and a.hourly_wage == 9.19

    def test_unknown_key(self):
        with pytest.raises(FormatError, match="line 2"):
            parse_assumptions("alpha = 0.1\nbogus = 3\n")

    def test_missing_key(self):
        with pytest.raises(FormatError, match="missing keys"):
            parse_assumptions("alpha = 0.1\n")

    def test_bad_number(self):
        with pytest.raises(FormatError, match="not a number"):
            parse_assumptions(self.TEXT.replace("= 10\n", "= ten\n"))

    def test_packaged_presets(self):
        from importlib import resources
        text = resources.files("evidencekit").joinpath("data", "upper.cfg").read_text()
        assert parse_assumptions(text) == UPPER
