"""Release-duration modulation toolkit for a storage-limited Poisson OOK link.

The transmitter of a molecular on/off-keying link refills its reservoir at a
fixed production rate, so consecutive "1" bits drain the storage and the
number of molecules available per slot depends on the run-length of ones.
This package computes optimal and sub-optimal release schedules under the
resulting prefix-sum storage constraints, adaptive decoding thresholds,
exact error probabilities with and without inter-symbol interference, and
provides a seeded Monte Carlo simulator plus a reproducible experiment CLI.
"""

__version__ = "0.1.0"

from .core import (
    SystemParams,
    IncrementSchedule,
    ThresholdPolicy,
    ErrorReport,
    FeasibilityReport,
    ParameterError,
    FeasibilityError,
    NumericError,
    poisson_pmf,
    pe_given_1,
    pe_given_0,
    dpe1,
    ml_fixed_threshold,
    validate_schedule,
)
from .noisi import (
    BoundarySequence,
    KktCertificate,
    solve_increments,
    brute_force_schedule,
    boundary_sequence,
    boundary_closed_form,
    pe_strategy1,
    pe_schedule,
    pe_bounds,
    increment_count_bound,
)
from .adaptive import (
    JointSolution,
    adaptive_thresholds,
    pe_adaptive,
    optimize_strategy3,
    optimize_strategy4,
)
from .isi import (
    IsiChain,
    IsiValueTable,
    SignalWeights,
    received_means,
    suboptimal_increments_1isi,
    suboptimal_increments_2isi,
    two_symbol_chain,
    isi_adaptive_threshold,
    isi_value_table,
    exact_pe_isi,
    strategy5_rates_1isi,
    strategy5_pe_bounds_1isi,
    strategy5_exact_pe_1isi,
    strategy5_rates_online,
)
from .simulate import (
    StrategySpec,
    SimReport,
    make_strategy,
    simulate,
    replay_trace,
)
from .experiments import (
    ExperimentConfig,
    parse_config,
    run_sweep,
    compare,
)

__all__ = [
    "SystemParams",
    "IncrementSchedule",
    "ThresholdPolicy",
    "ErrorReport",
    "FeasibilityReport",
    "ParameterError",
    "FeasibilityError",
    "NumericError",
    "poisson_pmf",
    "pe_given_1",
    "pe_given_0",
    "dpe1",
    "ml_fixed_threshold",
    "validate_schedule",
    "BoundarySequence",
    "KktCertificate",
    "solve_increments",
    "brute_force_schedule",
    "boundary_sequence",
    "boundary_closed_form",
    "pe_strategy1",
    "pe_schedule",
    "pe_bounds",
    "increment_count_bound",
    "JointSolution",
    "adaptive_thresholds",
    "pe_adaptive",
    "optimize_strategy3",
    "optimize_strategy4",
    "IsiChain",
    "IsiValueTable",
    "SignalWeights",
    "received_means",
    "suboptimal_increments_1isi",
    "suboptimal_increments_2isi",
    "two_symbol_chain",
    "isi_adaptive_threshold",
    "isi_value_table",
    "exact_pe_isi",
    "strategy5_rates_1isi",
    "strategy5_pe_bounds_1isi",
    "strategy5_exact_pe_1isi",
    "strategy5_rates_online",
    "StrategySpec",
    "SimReport",
    "make_strategy",
    "simulate",
    "replay_trace",
    "ExperimentConfig",
    "parse_config",
    "run_sweep",
    "compare",
]
