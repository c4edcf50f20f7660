"""How redundancy and error correlation change the failure probability.

For ``n`` redundant subsystems that fail independently with equal
probability, certifying the system at ``p_tol`` only requires certifying each
subsystem at ``p_tol ** (1/n)``, at the price of a Bonferroni-corrected
confidence level per subsystem.  Correlated failures erode most of that
gain; the pair and triple formulas below quantify by how much.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError, InfeasibleError

# relative slack when comparing a joint probability against its Frechet bounds
_FRECHET_TOL = 1e-12


def _check_probability(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


def _check_count(n, minimum=1):
    if int(n) != n or n < minimum:
        raise DomainError(f"n must be an integer >= {minimum}, got {n!r}")


def bonferroni_blowup(n: int, alpha: float) -> float:
    """Extra data factor ``n (1 - ln n / ln alpha)`` from separate test sets
    and a Bonferroni-corrected level ``alpha / n`` per subsystem."""
    _check_count(n)
    _check_probability("alpha", alpha)
    return n * (1.0 - math.log(n) / math.log(alpha))


def reduction_factor(p_tol: float, alpha: float, n: int) -> float:
    """Ratio of single-system test data to total data for ``n`` independent subsystems."""
    _check_count(n, minimum=2)
    _check_probability("p_tol", p_tol)
    return 1.0 / (p_tol ** (1.0 - 1.0 / n) * bonferroni_blowup(n, alpha))


def reduction_factor_uncorrected(p_tol: float, n: int) -> float:
    """Same ratio without the Bonferroni term: ``1 / (n p_tol^(1 - 1/n))``."""
    _check_count(n, minimum=2)
    _check_probability("p_tol", p_tol)
    return 1.0 / (n * p_tol ** (1.0 - 1.0 / n))


@dataclass(frozen=True)
class RedundancyPlan:
    n_subsystems: int
    p_tol: float
    alpha: float
    per_subsystem_samples: int
    total_samples: int
    reduction_factor: float
    bonferroni_blowup: float

    def to_dict(self):
        return asdict(self)


def subsystem_sample_size(p_tol: float, alpha: float, n: int) -> RedundancyPlan:
    """Failure-free samples per subsystem: ``ceil(-ln(alpha/n) / p_tol^(1/n))``."""
    _check_count(n)
    _check_probability("p_tol", p_tol)
    _check_probability("alpha", alpha)
    per = math.ceil(-math.log(alpha / n) / p_tol ** (1.0 / n))
    gamma = 1.0 if n == 1 else reduction_factor(p_tol, alpha, n)
    return RedundancyPlan(
        n_subsystems=int(n),
        p_tol=p_tol,
        alpha=alpha,
        per_subsystem_samples=per,
        total_samples=int(n) * per,
        reduction_factor=gamma,
        bonferroni_blowup=bonferroni_blowup(n, alpha),
    )


def joint_bounds(p1: float, p2: float) -> tuple[float, float]:
    """Frechet bounds on P(F1 and F2) given the marginals."""
    return max(0.0, p1 + p2 - 1.0), min(p1, p2)


def pair_failure_probability(p1: float, p2: float, rho: float) -> float:
    """Exact probability that both subsystems fail, given marginals and correlation.

    Raises :class:`InfeasibleError` when no 2x2 joint table has these
    marginals and this Pearson correlation; the value is never clamped.
    """
    _check_probability("p1", p1)
    _check_probability("p2", p2)
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [-1, 1], got {rho!r}")
    joint = rho * math.sqrt(p1 * (1.0 - p1)) * math.sqrt(p2 * (1.0 - p2)) + p1 * p2
    lo, hi = joint_bounds(p1, p2)
    slack = _FRECHET_TOL * max(hi, 1e-300)
    if joint < lo - slack or joint > hi + slack:
        raise InfeasibleError(
            f"rho={rho!r} with marginals ({p1!r}, {p2!r}) implies P(both fail)={joint!r}, "
            f"outside [{lo!r}, {hi!r}]"
        )
    return min(max(joint, lo), hi)


def correlation_bounds(p1: float, p2: float) -> tuple[float, float]:
    """Range of Pearson correlations attainable by two Bernoulli variables."""
    _check_probability("p1", p1)
    _check_probability("p2", p2)
    s = math.sqrt(p1 * (1.0 - p1) * p2 * (1.0 - p2))
    lo, hi = joint_bounds(p1, p2)
    return (lo - p1 * p2) / s, (hi - p1 * p2) / s


def pair_failure_probability_approx(p_sub: float, rho: float) -> float:
    """Small-probability form ``rho p + p^2`` for two equal subsystems."""
    return rho * p_sub + p_sub * p_sub


def triple_failure_probability_approx(p_sub: float, rho_12: float, rho_12_3: float,
                                      leading_order: bool = True) -> float:
    """Probability that three equal subsystems all fail.

    ``rho_12`` is the correlation of the first two failure indicators and
    ``rho_12_3`` the correlation of their joint failure with the third.
    The leading-order value is ``rho_12_3 sqrt(rho_12) p``; with
    ``leading_order=False`` the intermediate form keeping the pair term is
    returned instead::

        rho_12_3 sqrt((rho_12 p + p^2) p) + (rho_12 p + p^2) p
    """
    if leading_order:
        return rho_12_3 * math.sqrt(rho_12) * p_sub
    pair = pair_failure_probability_approx(p_sub, rho_12)
    return rho_12_3 * math.sqrt(pair * p_sub) + pair * p_sub


@dataclass(frozen=True)
class FrameChain:
    """Frames needed once redundancy (and possibly correlation) is accounted for."""

    single_system_frames: float
    n_subsystems: int
    alpha: float
    p_tol: float
    independent_frames: float
    correlated_frames: float | None
    correlated_frames_corrected: float | None
    rho: float | None

    def to_dict(self):
        return asdict(self)


def redundant_frame_chain(single_system_frames: float, p_tol: float, alpha: float,
                          n: int, rho: float | None = None) -> FrameChain:
    """Rescale a single-system frame requirement for ``n`` redundant subsystems.

    Independent subsystems divide the frames by the reduction factor.  For a
    weakly correlated pair the failure probability is about ``rho p_sub``, so
    only a factor ``1 / rho`` is gained for ``n = 2``; for ``n = 3`` with
    both correlations equal to ``rho`` the gain is ``1 / rho^1.5``.  The
    corrected value multiplies in :func:`bonferroni_blowup`.
    """
    _check_count(n, minimum=2)
    independent = single_system_frames / reduction_factor(p_tol, alpha, n)
    correlated = corrected = None
    if rho is not None:
        if not 0.0 < rho <= 1.0:
            raise DomainError(f"rho must lie in (0, 1] for the frame chain, got {rho!r}")
        if n == 2:
            correlated = single_system_frames * rho
        elif n == 3:
            correlated = single_system_frames * rho * math.sqrt(rho)
        else:
            raise DomainError("correlated closed forms exist only for n = 2 and n = 3")
        corrected = correlated * bonferroni_blowup(n, alpha)
    return FrameChain(
        single_system_frames=single_system_frames,
        n_subsystems=int(n),
        alpha=alpha,
        p_tol=p_tol,
        independent_frames=independent,
        correlated_frames=correlated,
        correlated_frames_corrected=corrected,
        rho=rho,
    )
