"""Support recovery of binary sparse signals from sparse Gaussian measurements.

Submodules: :mod:`~sparserec.model` (ensembles and observations),
:mod:`~sparserec.estimator` (support-constrained least squares),
:mod:`~sparserec.thresholds` (closed-form sample sizes),
:mod:`~sparserec.bounds` (Chernoff machinery and Monte Carlo oracles),
:mod:`~sparserec.experiments` (seeded sweeps) and :mod:`~sparserec.cli`.
"""

from .bounds import (BlockCounts, ChernoffKernel, MCEstimate, c_star, chernoff_base_exact,
                     chernoff_kernel, clt_statistic, gaussian_product_mgf, h_p_limit,
                     h_p_plugin, mgf_minus_delta_direct, mgf_minus_delta_mc,
                     proposition1_bound, ui_probe, xi)
from .estimator import (EstimateResult, SupportMLE, delta_statistic, loss, mle_exhaustive,
                        mle_local_search)
from .exceptions import (DomainError, EnumerationBudgetError, InfeasibleParametersError,
                         ParameterError, SparseRecError, UnreliableEstimateWarning, UsageError)
from .experiments import (ExperimentConfig, SweepSummary, TrialRecord, persist, run_trial,
                          sweep)
from .model import (DesignMatrix, Instance, SupportSet, dump_instance, load_instance,
                    make_instance, observe, sample_design, sample_signal, sparsify_and_rescale,
                    sym_diff_size)
from .thresholds import (RegimeParams, ThresholdReport, entropy, log_binomial,
                         power_law_gamma, price_of_sparsification, price_of_sparsity,
                         sparsification_budget, threshold, tradeoff_report, wang_necessary)

__all__ = [
    "BlockCounts", "ChernoffKernel", "MCEstimate", "c_star", "chernoff_base_exact",
    "chernoff_kernel", "clt_statistic", "gaussian_product_mgf", "h_p_limit", "h_p_plugin",
    "mgf_minus_delta_direct", "mgf_minus_delta_mc", "proposition1_bound", "ui_probe", "xi",
    "EstimateResult", "SupportMLE", "delta_statistic", "loss", "mle_exhaustive",
    "mle_local_search", "DomainError", "EnumerationBudgetError",
    "InfeasibleParametersError", "ParameterError", "SparseRecError",
    "UnreliableEstimateWarning", "UsageError", "ExperimentConfig", "SweepSummary",
    "TrialRecord", "persist", "run_trial", "sweep", "DesignMatrix", "Instance",
    "SupportSet", "dump_instance", "load_instance", "make_instance", "observe",
    "sample_design",
    "sample_signal", "sparsify_and_rescale", "sym_diff_size", "RegimeParams",
    "ThresholdReport", "entropy", "log_binomial", "power_law_gamma",
    "price_of_sparsification", "price_of_sparsity", "sparsification_budget", "threshold",
    "tradeoff_report", "wang_necessary",
]

__version__ = "0.1.0"
