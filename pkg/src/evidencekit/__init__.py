"""Statistical evidence toolkit for redundant perception systems."""

from .correlation import (QuantileConvention, correlation_ci, correlation_evidence_sample_size,
                          fisher_z, inverse_fisher_z)
from .errors import (DegenerateVarianceError, DomainError, EvidenceError, FormatError,
                     InfeasibleError, InsufficientDataError, TrainingDivergedError)
from .indicators import (IndicatorMatrix, SoftmaxTensor, accuracies, chi_square_independence,
                         committee_predict, entropy_binned_correlation, error_correlation,
                         mean_pairwise_correlation)
from .kofn import empirical_k_of_n, k_of_n_curve, theoretical_k_of_n
from .planner import (CampaignAssumptions, binomial_test, frame_requirement, parse_assumptions,
                      poisson_sample_size, statistical_factor, zero_failure_sample_size)
from .redundancy import (bonferroni_blowup, pair_failure_probability, reduction_factor,
                         redundant_frame_chain, subsystem_sample_size,
                         triple_failure_probability_approx)
from .simulator import CommonShockSpec, calibrate_common_shock, sample_ensemble, sample_pair

__all__ = [
    "CampaignAssumptions", "CommonShockSpec", "DegenerateVarianceError", "DomainError",
    "EvidenceError", "FormatError", "IndicatorMatrix", "InfeasibleError",
    "InsufficientDataError", "QuantileConvention", "SoftmaxTensor", "TrainingDivergedError",
    "accuracies", "binomial_test", "bonferroni_blowup", "calibrate_common_shock",
    "chi_square_independence", "committee_predict", "correlation_ci",
    "correlation_evidence_sample_size", "empirical_k_of_n", "entropy_binned_correlation",
    "error_correlation", "fisher_z", "frame_requirement", "inverse_fisher_z", "k_of_n_curve",
    "mean_pairwise_correlation", "pair_failure_probability", "parse_assumptions",
    "poisson_sample_size", "reduction_factor", "redundant_frame_chain", "sample_ensemble",
    "sample_pair", "statistical_factor", "subsystem_sample_size", "theoretical_k_of_n",
    "triple_failure_probability_approx", "zero_failure_sample_size",
]
