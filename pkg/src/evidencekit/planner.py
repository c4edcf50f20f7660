"""Sample sizes for certifying rare failure probabilities.

The exact one-sided binomial test accepts "p < p_tol" when the chance of
seeing more than the observed number of failures, under p = p_tol, is at
least ``1 - alpha``.  Everything here works in log space so that test
campaigns of 1e17 trials can be evaluated without underflow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

import numpy as np

from .errors import DomainError, FormatError

MAX_COUNT = 10**18
_CHUNK = 4096
# terms this far (in nats) below the running log-sum no longer change it
_NEGLIGIBLE = 40.0

# Published per-frame labeling cost for the two campaign columns, keyed by
# (minutes per frame, hourly wage).  Only used in paper mode.
PUBLISHED_COST_PER_FRAME = {
    (5.0, 9.19): 0.775,
    (90.0, 15.0): 22.5,
}


def _check_unit_interval(name, value):
    if not 0.0 < value < 1.0 or math.isnan(value):
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


def statistical_factor(alpha: float) -> float:
    """Multiplier on the expected frames per failure: ``-ln(alpha)``."""
    _check_unit_interval("alpha", alpha)
    return -math.log(alpha)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirling_error(n):
    """lgamma(n + 1) - (n + 1/2) ln n + n - ln sqrt(2 pi)."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LOG_SQRT_2PI
    nn = n * n
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / (1188 * nn)) / nn) / nn) / nn) / n


def _deviance(x, mean):
    """x ln(x / mean) + mean - x without cancellation near x = mean."""
    if abs(x - mean) < 0.1 * (x + mean):
        v = (x - mean) / (x + mean)
        s = (x - mean) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s_next = s + ej / (2 * j + 1)
            if s_next == s:
                return s_next
            s = s_next
        return s
    return x * math.log(x / mean) + mean - x


def _log_binom_pmf(n, j, log_p, log_q):
    # saddle-point form stays accurate for n up to 1e18
    if j == 0:
        return n * log_q
    if j == n:
        return n * log_p
    n, j = float(n), float(j)
    p, q = math.exp(log_p), -math.expm1(log_p)
    return (_stirling_error(n) - _stirling_error(j) - _stirling_error(n - j)
            - _deviance(j, n * p) - _deviance(n - j, n * q)
            + 0.5 * math.log(n / (2.0 * math.pi * j * (n - j))))


def _log_tail(n, start, stop, step, log_p, log_q):
    """Log of sum pmf(j) for j = start, start + step, ... up to ``stop``.

    Terms come from the pmf ratio recurrence.  The walk always moves away
    from the mode, so it ends as soon as new terms are negligible.
    """
    log_term = _log_binom_pmf(n, start, log_p, log_q)
    total = log_term
    j = start
    while j != stop:
        count = min(_CHUNK, abs(stop - j))
        idx = j + step * np.arange(count, dtype=float)
        if step > 0:
            steps = np.log(float(n) - idx) - np.log(idx + 1.0) + log_p - log_q
        else:
            steps = np.log(idx) - np.log(float(n) - idx + 1.0) - log_p + log_q
        logs = log_term + np.cumsum(steps)
        peak = logs.max()
        chunk = peak + math.log(float(np.exp(logs - peak).sum()))
        total = float(np.logaddexp(total, chunk))
        log_term = float(logs[-1])
        j += step * count
        if log_term < total - _NEGLIGIBLE:
            break
    return total


def exceedance_probability(n_test: int, n_obs: int, p_tol: float) -> float:
    """P(N > n_obs) for N ~ Binomial(n_test, p_tol)."""
    if n_obs >= n_test:
        return 0.0
    log_p = math.log(p_tol)
    log_q = math.log1p(-p_tol)
    if n_obs == 0:
        return -math.expm1(n_test * log_q)
    mode = math.floor((n_test + 1) * p_tol)
    if n_obs < mode:
        # lower tail is the small side: sum downwards from n_obs
        log_cdf = _log_tail(n_test, n_obs, 0, -1, log_p, log_q)
        return -math.expm1(min(log_cdf, 0.0))
    log_sf = _log_tail(n_test, n_obs + 1, n_test, 1, log_p, log_q)
    return min(1.0, math.exp(log_sf))


@dataclass(frozen=True)
class EvidenceDecision:
    accept_h1: bool
    attained_confidence: float
    p_tol: float
    alpha: float
    n_test: int
    n_obs: int


def binomial_test(n_test: int, n_obs: int, p_tol: float, alpha: float) -> EvidenceDecision:
    """Exact one-sided test of H1: p < p_tol after ``n_obs`` failures in ``n_test`` trials."""
    _check_unit_interval("p_tol", p_tol)
    _check_unit_interval("alpha", alpha)
    if n_test < 0 or n_obs < 0:
        raise DomainError("counts must be nonnegative")
    if n_obs > n_test:
        raise DomainError(f"n_obs={n_obs} exceeds n_test={n_test}")
    if n_test > MAX_COUNT:
        raise DomainError(f"n_test above {MAX_COUNT:.0e} is not supported")
    attained = exceedance_probability(int(n_test), int(n_obs), p_tol)
    return EvidenceDecision(
        accept_h1=attained >= 1.0 - alpha,
        attained_confidence=attained,
        p_tol=p_tol,
        alpha=alpha,
        n_test=int(n_test),
        n_obs=int(n_obs),
    )


def zero_failure_sample_size(p_tol: float, alpha: float) -> int:
    """Smallest failure-free campaign length that certifies p < p_tol.

    Exact form ``ceil(ln(alpha) / ln(1 - p_tol))``, adjusted by one step if
    floating rounding puts it on the wrong side of :func:`binomial_test`.
    """
    _check_unit_interval("p_tol", p_tol)
    _check_unit_interval("alpha", alpha)
    log_q = math.log1p(-p_tol)
    n = math.ceil(math.log(alpha) / log_q)
    if n > MAX_COUNT:
        raise OverflowError(f"required sample size {n:.3e} exceeds {MAX_COUNT:.0e}")

    def accepts(m):
        return -math.expm1(m * log_q) >= 1.0 - alpha

    while n > 1 and accepts(n - 1):
        n -= 1
    while not accepts(n):
        n += 1
    return max(n, 1)


def poisson_sample_size(p_tol: float, alpha: float) -> float:
    """Rate-based counterpart ``-ln(alpha) / p_tol`` of the zero-failure bound."""
    _check_unit_interval("p_tol", p_tol)
    return statistical_factor(alpha) / p_tol


@dataclass(frozen=True)
class CampaignAssumptions:
    """Inputs of the campaign-scale data requirement.

    ``robot_safety_factor`` is the extra safety demanded of the automated
    system relative to humans; ``perception_risk_fraction`` is the share of
    the total acceptable risk assigned to perception errors.
    """

    meters_per_fatality: float
    meters_per_frame: float
    alpha: float
    robot_safety_factor: float
    perception_risk_fraction: float
    minutes_per_frame_label: float
    hourly_wage: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise DomainError(f"{f.name} must be a positive finite number, got {value!r}")
        if self.alpha >= 1.0:
            raise DomainError(f"alpha must be < 1, got {self.alpha!r}")
        if self.perception_risk_fraction > 1.0:
            raise DomainError(
                f"perception_risk_fraction must be <= 1, got {self.perception_risk_fraction!r}"
            )

    @property
    def p_tol_per_frame(self) -> float:
        """Tolerated failure probability per frame implied by the assumptions."""
        fraction = self.perception_risk_fraction / self.robot_safety_factor
        return fraction * self.meters_per_frame / self.meters_per_fatality


@dataclass(frozen=True)
class RequirementReport:
    base_frames: float
    statistical_factor: float
    frames_after_statistics: float
    frames_after_safety: float
    frames_final: float
    exact_cost_per_frame: float
    cost_per_frame: float
    total_cost: float
    paper_mode: bool

    def to_dict(self):
        return asdict(self)


def frame_requirement(assumptions: CampaignAssumptions, paper_mode: bool = False) -> RequirementReport:
    """Frames and labeling cost needed for a direct zero-failure test campaign.

    Stages follow the campaign table row by row.  With ``paper_mode`` the
    cost per frame is replaced by the published rounded figure when the
    labeling time and wage match one of the published columns.
    """
    a = assumptions
    base = a.meters_per_fatality / a.meters_per_frame
    factor = statistical_factor(a.alpha)
    after_stats = base * factor
    after_safety = after_stats * a.robot_safety_factor
    final = after_safety / a.perception_risk_fraction
    exact_cost = a.minutes_per_frame_label / 60.0 * a.hourly_wage
    cost = exact_cost
    if paper_mode:
        cost = PUBLISHED_COST_PER_FRAME.get(
            (float(a.minutes_per_frame_label), float(a.hourly_wage)), exact_cost
        )
    return RequirementReport(
        base_frames=base,
        statistical_factor=factor,
        frames_after_statistics=after_stats,
        frames_after_safety=after_safety,
        frames_final=final,
        exact_cost_per_frame=exact_cost,
        cost_per_frame=cost,
        total_cost=final * cost,
        paper_mode=paper_mode,
    )


def _parse_number(text):
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_assumptions(text: str, overrides: dict | None = None, path=None) -> CampaignAssumptions:
    """Read ``key = value`` lines (``#`` starts a comment) into assumptions.

    Values may be decimals or fractions such as ``1/2``.  ``overrides``
    take precedence over the file.
    """
    known = {f.name for f in fields(CampaignAssumptions)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", line=lineno, path=path)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise FormatError(f"unknown key {key!r}", line=lineno, path=path)
        try:
            values[key] = _parse_number(value)
        except (ValueError, ZeroDivisionError):
            raise FormatError(f"value for {key!r} is not a number: {value.strip()!r}",
                              line=lineno, path=path) from None
    if overrides:
        for key, value in overrides.items():
            if key not in known:
                raise DomainError(f"unknown assumption {key!r}")
            if value is not None:
                values[key] = float(value)
    missing = sorted(known - values.keys())
    if missing:
        raise FormatError(f"missing keys: {', '.join(missing)}", path=path)
    return CampaignAssumptions(**values)


def format_assumptions(assumptions: CampaignAssumptions) -> str:
    return "".join(f"{f.name} = {getattr(assumptions, f.name)!r}\n"
                   for f in fields(CampaignAssumptions))
