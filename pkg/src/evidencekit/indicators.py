"""Empirical analysis of per-sample failure indicators.

An :class:`IndicatorMatrix` holds one row per sample and one column per
model, with 1 marking a misclassification.  All pairwise statistics are
computed from the 2x2 contingency counts of two columns, so the Pearson
correlation and the chi-square statistic are tied by ``chi2 = N rho^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._special import chi2_sf
from .errors import DegenerateVarianceError, DomainError, InsufficientDataError


@dataclass(frozen=True, eq=False)
class IndicatorMatrix:
    values: np.ndarray
    model_names: tuple[str, ...] = ()
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DomainError(f"indicator matrix must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DomainError("indicator matrix needs at least one sample and one model")
        if values.dtype != np.uint8:
            if not np.isin(values, (0, 1)).all():
                raise DomainError("indicator entries must be 0 or 1")
            values = values.astype(np.uint8)
        elif values.max(initial=0) > 1:
            raise DomainError("indicator entries must be 0 or 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.model_names) or tuple(f"m{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DomainError(f"{len(names)} model names for {values.shape[1]} columns")
        object.__setattr__(self, "model_names", names)
        if self.sample_ids is not None:
            ids = tuple(self.sample_ids)
            if len(ids) != values.shape[0]:
                raise DomainError(f"{len(ids)} sample ids for {values.shape[0]} rows")
            object.__setattr__(self, "sample_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_models(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def subset(self, rows) -> IndicatorMatrix:
        ids = None if self.sample_ids is None else tuple(np.asarray(self.sample_ids, dtype=object)[rows])
        return IndicatorMatrix(self.values[rows], self.model_names, ids)

    def __eq__(self, other):
        if not isinstance(other, IndicatorMatrix):
            return NotImplemented
        return (self.model_names == other.model_names
                and self.sample_ids == other.sample_ids
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class SoftmaxTensor:
    """Class probabilities of shape (samples, models, classes) plus true labels."""

    probabilities: np.ndarray
    labels: np.ndarray
    model_names: tuple[str, ...] = ()
    sample_ids: tuple[str, ...] | None = None
    tolerance: float = field(default=1e-6, repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        labels = np.asarray(self.labels)
        if probs.ndim != 3:
            raise DomainError(f"softmax tensor must be 3-D, got shape {probs.shape}")
        n, m, c = probs.shape
        if n < 1 or m < 1:
            raise DomainError("softmax tensor needs at least one sample and one model")
        if c < 2:
            raise DomainError("need at least two classes")
        if labels.shape != (n,):
            raise DomainError(f"expected {n} labels, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise DomainError("labels must be integer class indices")
            labels = labels.astype(np.int64)
        if labels.min() < 0 or labels.max() >= c:
            raise DomainError(f"labels must lie in 0..{c - 1}")
        if (probs < 0).any() or not np.isfinite(probs).all():
            raise DomainError("probabilities must be finite and nonnegative")
        sums = probs.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > self.tolerance)
        if bad.size:
            s, mdl = bad[0]
            raise DomainError(
                f"probabilities of sample {s}, model {mdl} sum to {sums[s, mdl]!r}, not 1"
            )
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        names = tuple(self.model_names) or tuple(f"m{i}" for i in range(m))
        if len(names) != m:
            raise DomainError(f"{len(names)} model names for {m} models")
        object.__setattr__(self, "model_names", names)
        if self.sample_ids is not None:
            object.__setattr__(self, "sample_ids", tuple(self.sample_ids))

    @property
    def n_samples(self) -> int:
        return self.probabilities.shape[0]

    @property
    def n_models(self) -> int:
        return self.probabilities.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probabilities.shape[2]

    def predictions(self) -> np.ndarray:
        """Top-1 class per sample and model; ties go to the lowest class index."""
        return np.argmax(self.probabilities, axis=2)

    def indicators(self) -> IndicatorMatrix:
        errors = self.predictions() != self.labels[:, None]
        return IndicatorMatrix(errors.astype(np.uint8), self.model_names, self.sample_ids)

    def entropies(self) -> np.ndarray:
        """Shannon entropy (nats) per sample and model, with 0 ln 0 = 0."""
        p = self.probabilities
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        return -terms.sum(axis=2)


def contingency_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int, int, int]:
    """Counts (n11, n10, n01, n00) of two binary columns."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    n11 = int(np.count_nonzero(a & b))
    n10 = int(np.count_nonzero(a)) - n11
    n01 = int(np.count_nonzero(b)) - n11
    n00 = a.size - n11 - n10 - n01
    return n11, n10, n01, n00


def _phi(n11, n10, n01, n00):
    row1, row0 = n11 + n10, n01 + n00
    col1, col0 = n11 + n01, n10 + n00
    if 0 in (row1, row0, col1, col0):
        return None
    # products of counts up to 1e18 stay exact as Python ints
    num = n11 * n00 - n10 * n01
    return num / math.sqrt(row1 * row0 * col1 * col0)


def _check_index(indicators, i):
    if not 0 <= i < indicators.n_models:
        raise DomainError(f"model index {i} out of range 0..{indicators.n_models - 1}")


def column_correlation(a, b) -> float:
    """Pearson correlation of two binary vectors; raises on a constant vector."""
    phi = _phi(*contingency_counts(a, b))
    if phi is None:
        raise DegenerateVarianceError("a failure indicator column is constant; correlation undefined")
    return max(-1.0, min(1.0, phi))


def error_correlation(indicators: IndicatorMatrix, i: int, j: int) -> float:
    """Pearson correlation of the failure indicators of models ``i`` and ``j``."""
    _check_index(indicators, i)
    _check_index(indicators, j)
    try:
        return column_correlation(indicators.column(i), indicators.column(j))
    except DegenerateVarianceError:
        names = indicators.model_names
        raise DegenerateVarianceError(
            f"correlation of {names[i]!r} and {names[j]!r} undefined: "
            "one of them never or always fails"
        ) from None


def pairwise_correlations(indicators: IndicatorMatrix) -> np.ndarray:
    n = indicators.n_models
    rho = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rho[i, j] = rho[j, i] = error_correlation(indicators, i, j)
    return rho


def mean_pairwise_correlation(indicators: IndicatorMatrix) -> float:
    """Mean error correlation over all model pairs ``i < j``."""
    n = indicators.n_models
    if n < 2:
        raise DomainError("mean pairwise correlation needs at least two models")
    rho = pairwise_correlations(indicators)
    return float(rho[np.triu_indices(n, k=1)].mean())


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    reject_independence: bool


def chi_square_independence(indicators: IndicatorMatrix, i: int, j: int,
                            alpha: float = 0.05) -> ChiSquareResult:
    """Pearson chi-square test (df = 1, no continuity correction) on a 2x2 table."""
    _check_index(indicators, i)
    _check_index(indicators, j)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    n11, n10, n01, n00 = contingency_counts(indicators.column(i), indicators.column(j))
    n = n11 + n10 + n01 + n00
    rows = (n11 + n10, n01 + n00)
    cols = (n11 + n01, n10 + n00)
    if 0 in rows or 0 in cols:
        raise InsufficientDataError(
            f"zero expected count for models {indicators.model_names[i]!r} and "
            f"{indicators.model_names[j]!r}; a larger sample with both outcomes is needed"
        )
    observed = ((n11, n10), (n01, n00))
    stat = 0.0
    for r in range(2):
        for c in range(2):
            expected = rows[r] * cols[c] / n
            stat += (observed[r][c] - expected) ** 2 / expected
    p = chi2_sf(stat, 1)
    return ChiSquareResult(statistic=stat, p_value=p, reject_independence=p < alpha)


def accuracies(indicators: IndicatorMatrix) -> tuple[float, float]:
    """Average per-model accuracy and joint accuracy 1 - P(all models fail)."""
    v = indicators.values
    avg = 1.0 - float(v.mean())
    joint = 1.0 - float(v.all(axis=1).mean())
    return avg, joint


@dataclass(frozen=True)
class EntropyBin:
    bin_index: int
    size: int
    rho: float | None
    degenerate: bool
    mean_entropy: float
    sample_indices: np.ndarray = field(repr=False, compare=False)


def entropy_bins(softmax: SoftmaxTensor, i: int, j: int, n_bins: int) -> list[np.ndarray]:
    """Sample indices of ``n_bins`` equal-count groups of ascending summed entropy.

    Sorting is stable so ties keep sample order; the first ``N % n_bins``
    bins take one extra sample.
    """
    n = softmax.n_samples
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins!r}")
    if n < n_bins:
        raise DomainError(f"{n} samples cannot fill {n_bins} bins")
    for k in (i, j):
        if not 0 <= k < softmax.n_models:
            raise DomainError(f"model index {k} out of range")
    h = softmax.entropies()
    order = np.argsort(h[:, i] + h[:, j], kind="stable")
    base, extra = divmod(n, n_bins)
    sizes = [base + (1 if b < extra else 0) for b in range(n_bins)]
    return np.split(order, np.cumsum(sizes)[:-1])


def entropy_binned_correlation(softmax: SoftmaxTensor, i: int, j: int,
                               n_bins: int = 8) -> list[EntropyBin]:
    """Error correlation of models ``i`` and ``j`` within summed-entropy bins.

    A bin in which either model never (or always) fails is reported with
    ``degenerate=True`` and ``rho=None``.
    """
    errors = softmax.indicators().values
    h = softmax.entropies()
    summed = h[:, i] + h[:, j]
    out = []
    for b, idx in enumerate(entropy_bins(softmax, i, j, n_bins), start=1):
        phi = _phi(*contingency_counts(errors[idx, i], errors[idx, j]))
        out.append(EntropyBin(
            bin_index=b,
            size=int(idx.size),
            rho=None if phi is None else max(-1.0, min(1.0, phi)),
            degenerate=phi is None,
            mean_entropy=float(summed[idx].mean()),
            sample_indices=idx,
        ))
    return out


def committee_predict(softmax: SoftmaxTensor, members=None) -> tuple[np.ndarray, np.ndarray]:
    """Pool members by class-wise summed probabilities and take the argmax.

    Returns the predicted labels and the committee's 0/1 error column.
    Ties resolve to the lowest class index.
    """
    if members is None:
        members = range(softmax.n_models)
    members = list(members)
    if not members:
        raise DomainError("committee needs at least one member")
    for k in members:
        if not 0 <= k < softmax.n_models:
            raise DomainError(f"member index {k} out of range")
    pooled = softmax.probabilities[:, members, :].sum(axis=1)
    pred = np.argmax(pooled, axis=1)
    return pred, (pred != softmax.labels).astype(np.uint8)


@dataclass(frozen=True)
class CorrelationReport:
    model_names: tuple[str, ...]
    pairwise_rho: np.ndarray
    mean_rho: float | None
    chi2: list[dict]
    avg_accuracy: float
    joint_accuracy: float
    n_samples: int

    def to_dict(self):
        return {
            "model_names": list(self.model_names),
            "n_samples": self.n_samples,
            "pairwise_rho": [[None if math.isnan(x) else float(x) for x in row]
                             for row in self.pairwise_rho],
            "mean_rho": self.mean_rho,
            "chi2": self.chi2,
            "avg_accuracy": self.avg_accuracy,
            "joint_accuracy": self.joint_accuracy,
        }


def correlation_report(indicators: IndicatorMatrix, alpha: float = 0.05) -> CorrelationReport:
    """All pairwise statistics of a matrix.

    Degenerate pairs appear as ``None`` in the JSON form rather than raising,
    and are excluded from ``mean_rho`` (which is ``None`` if no pair is usable).
    """
    n = indicators.n_models
    rho = np.eye(n)
    chi2 = []
    usable = []
    for i in range(n):
        for j in range(i + 1, n):
            try:
                r = error_correlation(indicators, i, j)
                test = chi_square_independence(indicators, i, j, alpha)
            except DomainError:
                rho[i, j] = rho[j, i] = math.nan
                chi2.append({"i": i, "j": j, "stat": None, "p": None, "reject": None})
                continue
            rho[i, j] = rho[j, i] = r
            usable.append(r)
            chi2.append({"i": i, "j": j, "stat": test.statistic, "p": test.p_value,
                         "reject": test.reject_independence})
    avg, joint = accuracies(indicators)
    return CorrelationReport(
        model_names=indicators.model_names,
        pairwise_rho=rho,
        mean_rho=float(np.mean(usable)) if usable else None,
        chi2=chi2,
        avg_accuracy=avg,
        joint_accuracy=joint,
        n_samples=indicators.n_samples,
    )
