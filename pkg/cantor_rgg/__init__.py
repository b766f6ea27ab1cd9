"""Connectivity thresholds of random geometric graphs on Cantor(phi) distributed points"""

__version__ = "1.0.0"

from cantor_rgg.exceptions import (CantorError, ConfigError, ConsistencyError, DomainError,
                                   ParameterDomainError, SamplerConsistencyError)
from cantor_rgg.experiments import (estimate_escape_probability, occupancy_test, replicate_batch, run_convergence,
                                    run_experiment, run_l1_rate, verify_identity)
from cantor_rgg.model import (CantorParams, ExactSequence, ExperimentConfig, ExperimentResult, NumericSequence,
                              RateConstant, ResultRow, SampleBatch, SplitStats, Target, ThresholdResult)
from cantor_rgg.params import cantor_cdf, cantor_intervals, make_params, theoretical_limit
from cantor_rgg.sampler import sample_batch, split_stats
from cantor_rgg.sequence import compute_sequence, compute_sequence_numeric, min_expectation_oracle
from cantor_rgg.specfun import gamma, rate_constant, zeta
from cantor_rgg.threshold import connectivity_threshold, is_connected, threshold_by_search

__all__ = [
    CantorError.__name__,
    ConfigError.__name__,
    ConsistencyError.__name__,
    DomainError.__name__,
    ParameterDomainError.__name__,
    SamplerConsistencyError.__name__,
    CantorParams.__name__,
    ExactSequence.__name__,
    ExperimentConfig.__name__,
    ExperimentResult.__name__,
    NumericSequence.__name__,
    RateConstant.__name__,
    ResultRow.__name__,
    SampleBatch.__name__,
    SplitStats.__name__,
    Target.__name__,
    ThresholdResult.__name__,
    cantor_cdf.__name__,
    cantor_intervals.__name__,
    compute_sequence.__name__,
    compute_sequence_numeric.__name__,
    connectivity_threshold.__name__,
    estimate_escape_probability.__name__,
    gamma.__name__,
    is_connected.__name__,
    make_params.__name__,
    min_expectation_oracle.__name__,
    occupancy_test.__name__,
    rate_constant.__name__,
    replicate_batch.__name__,
    run_convergence.__name__,
    run_experiment.__name__,
    run_l1_rate.__name__,
    sample_batch.__name__,
    split_stats.__name__,
    theoretical_limit.__name__,
    threshold_by_search.__name__,
    verify_identity.__name__,
    zeta.__name__,
]
