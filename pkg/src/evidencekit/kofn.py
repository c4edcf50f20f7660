"""k-out-of-n system reliability.

A committee of ``n`` classifiers is functional on a sample when at least
``k`` members are correct, i.e. at most ``n - k`` of them fail.  ``k = 1``
is the active parallel connection.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .indicators import IndicatorMatrix


def _check_kn(n, k):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if int(k) != k or not 1 <= k <= n:
        raise DomainError(f"k must be an integer in 1..{n}, got {k!r}")


def theoretical_k_of_n(p_sub: float, n: int, k: int) -> float:
    """P(at least k of n independent members work), each failing with ``p_sub``.

    Sums ``C(n, j) (1 - p)^j p^(n - j)`` for ``j = k..n`` from log-space terms.
    """
    _check_kn(n, k)
    if not 0.0 <= p_sub <= 1.0:
        raise DomainError(f"p_sub must lie in [0, 1], got {p_sub!r}")
    if p_sub == 0.0:
        return 1.0
    if p_sub == 1.0:
        return 0.0
    log_fail = math.log(p_sub)
    log_ok = math.log1p(-p_sub)
    logs = [
        math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
        + j * log_ok + (n - j) * log_fail
        for j in range(k, n + 1)
    ]
    peak = max(logs)
    total = peak + math.log(math.fsum(math.exp(x - peak) for x in logs))
    return min(1.0, math.exp(total))


def empirical_k_of_n(indicators: IndicatorMatrix, k: int) -> float:
    """Fraction of samples on which at most ``n - k`` models fail."""
    n = indicators.n_models
    _check_kn(n, k)
    failures = indicators.values.sum(axis=1, dtype=np.int64)
    return float(np.count_nonzero(failures <= n - k)) / indicators.n_samples


def k_of_n_curve(indicators: IndicatorMatrix) -> list[float]:
    """Empirical k-out-of-n accuracy for k = 1..n."""
    n = indicators.n_models
    failures = indicators.values.sum(axis=1, dtype=np.int64)
    counts = np.bincount(failures, minlength=n + 1)
    # at most n - k failures
    cumulative = np.cumsum(counts)
    return [float(cumulative[n - k]) / indicators.n_samples for k in range(1, n + 1)]
