"""Confidence intervals for a correlation and the data needed to bound it.

The Fisher transform of an empirical correlation is roughly normal with
standard deviation ``1 / sqrt(N - 3)``.  Demonstrating ``|rho| <= p_sub``
with ``p_sub = sqrt(p_tol)`` therefore needs ``N ~ z^2 / p_tol`` pairs,
which scales exactly like the direct test it was meant to replace.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from ._special import normal_quantile
from .errors import DomainError

__all__ = [
    "CorrelationCI",
    "QuantileConvention",
    "correlation_ci",
    "correlation_evidence_sample_size",
    "critical_value",
    "fisher_z",
    "inverse_fisher_z",
    "normal_quantile",
]


class QuantileConvention(str, enum.Enum):
    """Which normal quantile multiplies the standard error.

    ``TWO_SIDED`` uses ``z_{1 - alpha/2}``.  ``ONE_SIDED`` uses
    ``z_{1 - alpha}``, which reproduces the published squared quantiles
    2.706 (alpha = 5%) and 13.831 (alpha = 0.01%).
    """

    TWO_SIDED = "two_sided"
    ONE_SIDED = "one_sided"


def critical_value(alpha: float, convention=QuantileConvention.TWO_SIDED) -> float:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    convention = QuantileConvention(convention)
    tail = alpha / 2.0 if convention is QuantileConvention.TWO_SIDED else alpha
    return -normal_quantile(tail)


def fisher_z(rho: float) -> float:
    """``0.5 ln((1 + rho) / (1 - rho))``."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"fisher_z needs |rho| < 1, got {rho!r}")
    return math.atanh(rho)


def inverse_fisher_z(z: float) -> float:
    """``(exp(2z) - 1) / (exp(2z) + 1)``, evaluated as tanh for stability."""
    return math.tanh(z)


@dataclass(frozen=True)
class CorrelationCI:
    rho_hat: float
    n_pairs: int
    alpha: float
    z_hat: float
    z_lo: float
    z_hi: float
    rho_lo: float
    rho_hi: float

    @property
    def width(self) -> float:
        return self.rho_hi - self.rho_lo

    def covers(self, rho: float) -> bool:
        return self.rho_lo <= rho <= self.rho_hi

    def to_dict(self):
        return asdict(self)


def correlation_ci(rho_hat: float, n_pairs: int, alpha: float,
                   convention=QuantileConvention.TWO_SIDED) -> CorrelationCI:
    """Fisher-z confidence interval for a Pearson correlation at level ``1 - alpha``."""
    if n_pairs <= 3:
        raise DomainError(f"need more than 3 pairs, got {n_pairs!r}")
    z_hat = fisher_z(rho_hat)
    half = critical_value(alpha, convention) / math.sqrt(n_pairs - 3)
    z_lo, z_hi = z_hat - half, z_hat + half
    return CorrelationCI(
        rho_hat=rho_hat,
        n_pairs=int(n_pairs),
        alpha=alpha,
        z_hat=z_hat,
        z_lo=z_lo,
        z_hi=z_hi,
        rho_lo=inverse_fisher_z(z_lo),
        rho_hi=inverse_fisher_z(z_hi),
    )


def correlation_evidence_sample_size(p_tol: float, alpha: float,
                                     convention=QuantileConvention.TWO_SIDED) -> int:
    """Pairs needed to bound ``|rho|`` by ``sqrt(p_tol)``: ``ceil(z^2 / p_tol) + 3``."""
    if not 0.0 < p_tol <= 1.0:
        raise DomainError(f"p_tol must lie in (0, 1], got {p_tol!r}")
    z = critical_value(alpha, convention)
    return math.ceil(z * z / p_tol) + 3
