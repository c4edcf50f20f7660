"""Correlated binary failure processes for Monte Carlo checks.

Two generators are provided:

* an exact 2x2 joint table for a pair with given marginals and Pearson
  correlation (negative correlation allowed within the Frechet bounds);
* an exchangeable common-shock model for ``n`` members: with probability
  ``theta`` every member fails together, otherwise each fails independently
  with probability ``q``.

Random streams come from numpy's Philox counter-based generator.  Rows are
produced in fixed-size chunks, each with its own stream spawned from the
seed, so the output depends only on (seed, n_samples) and not on how many
workers generate the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .indicators import IndicatorMatrix
from .redundancy import pair_failure_probability

CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class CommonShockSpec:
    p: float
    rho: float
    n_members: int
    theta: float
    q: float

    @classmethod
    def calibrate(cls, p: float, rho: float, n_members: int) -> CommonShockSpec:
        if int(n_members) != n_members or n_members < 2:
            raise DomainError(f"n_members must be an integer >= 2, got {n_members!r}")
        theta, q = calibrate_common_shock(p, rho)
        return cls(p=p, rho=rho, n_members=int(n_members), theta=theta, q=q)

    def marginal(self) -> float:
        return self.theta + (1.0 - self.theta) * self.q

    def joint(self, m: int) -> float:
        """P(a given set of ``m`` members all fail)."""
        return self.theta + (1.0 - self.theta) * self.q ** m

    def implied_rho(self) -> float:
        p = self.marginal()
        return (self.joint(2) - p * p) / (p * (1.0 - p))

    def pair_triple_rho(self) -> float:
        """Correlation of the joint failure of two members with a third."""
        p, p12, p123 = self.marginal(), self.joint(2), self.joint(3)
        return (p123 - p12 * p) / math.sqrt(p12 * (1.0 - p12) * p * (1.0 - p))


def calibrate_common_shock(p: float, rho: float, tol: float = 1e-12) -> tuple[float, float]:
    """Shock probability ``theta`` and idiosyncratic ``q`` for marginal ``p`` and correlation ``rho``.

    Solves ``theta + (1 - theta) q = p`` and
    ``theta + (1 - theta) q^2 = rho p (1 - p) + p^2`` by bisection on
    ``theta`` in ``[0, p]``.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"common-shock model needs 0 <= rho < 1, got {rho!r}")
    target = rho * p * (1.0 - p) + p * p

    def residual(theta):
        q = (p - theta) / (1.0 - theta)
        return theta + (1.0 - theta) * q * q - target

    lo, hi = 0.0, p
    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo > tol or r_hi < -tol:
        raise InfeasibleError(f"no common-shock calibration for p={p!r}, rho={rho!r}")
    if abs(r_lo) <= tol * target:
        theta = 0.0
    else:
        # the residual is strictly increasing in theta; halve until lo, hi are adjacent floats
        while True:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if residual(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
    q = (p - theta) / (1.0 - theta)
    return theta, q


def _chunk_streams(seed, n_samples):
    n_chunks = max(1, -(-n_samples // CHUNK_ROWS))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    bounds = [(c * CHUNK_ROWS, min(n_samples, (c + 1) * CHUNK_ROWS)) for c in range(n_chunks)]
    return [(np.random.Generator(np.random.Philox(s)), lo, hi) for s, (lo, hi) in zip(children, bounds)]


def _fill(out, seed, work, jobs):
    streams = _chunk_streams(seed, out.shape[0])
    if jobs and jobs > 1 and len(streams) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(lambda s: work(*s), streams))
    else:
        for s in streams:
            work(*s)
    return out


def joint_table(p1: float, p2: float, rho: float) -> tuple[float, float, float, float]:
    """Cell probabilities (p11, p10, p01, p00) of two correlated failure indicators."""
    p11 = pair_failure_probability(p1, p2, rho)
    p10 = max(0.0, p1 - p11)
    p01 = max(0.0, p2 - p11)
    p00 = max(0.0, 1.0 - p11 - p10 - p01)
    return p11, p10, p01, p00


def sample_pair(p1: float, p2: float, rho: float, n_samples: int, seed: int = 0,
                jobs: int = 1) -> IndicatorMatrix:
    """I.i.d. rows drawn from the exact joint table of two indicators."""
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    p11, p10, p01, _ = joint_table(p1, p2, rho)
    edges = np.cumsum([p11, p10, p01])
    out = np.empty((n_samples, 2), dtype=np.uint8)

    def work(rng, lo, hi):
        u = rng.random(hi - lo)
        cell = np.searchsorted(edges, u, side="right")
        out[lo:hi, 0] = (cell == 0) | (cell == 1)
        out[lo:hi, 1] = (cell == 0) | (cell == 2)

    _fill(out, seed, work, jobs)
    return IndicatorMatrix(out, ("m0", "m1"))


def sample_ensemble(spec: CommonShockSpec, n_samples: int, seed: int = 0,
                    jobs: int = 1) -> IndicatorMatrix:
    """I.i.d. rows of the exchangeable common-shock failure vector."""
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    n = spec.n_members
    out = np.empty((n_samples, n), dtype=np.uint8)

    def work(rng, lo, hi):
        shock = rng.random(hi - lo) < spec.theta
        own = rng.random((hi - lo, n)) < spec.q
        out[lo:hi] = own | shock[:, None]

    _fill(out, seed, work, jobs)
    return IndicatorMatrix(out, tuple(f"m{i}" for i in range(n)))
