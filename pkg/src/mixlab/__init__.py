"""Deviation experiments for Gibbs-mixture aggregation over finite expert sets.

The package builds two-point output distributions on which averaged
aggregation rules exhibit heavy-tailed excess risk while a plain empirical
risk minimizer does not, and ships the exact random-walk computations needed
to certify both effects without simulation error.
"""

from .losses import LossSpec, make_loss, exp_concavity_parameter, verify_assumptions
from .constructions import (
    ConstantExpert,
    ConstructionError,
    TwoPointConstruction,
    big_m,
    erm_gamma,
    gamma_schedule,
    kappa,
    tau,
)
from .aggregation import (
    AggregatorTrace,
    build_trace,
    cumulative_losses,
    erm_select,
    feasible_interval,
    gibbs_weights,
    mix_bound,
    per_sequence_regret,
    pim_predict,
    pm_predict,
    two_expert_weight,
)
from .kernels import backend

__version__ = "0.1.0"

from .harness import (
    ExperimentConfig,
    RecordSet,
    ReplicateRecord,
    deviation_experiment,
    deviation_upper_check,
    erm_exact_lower,
    erm_upper_check,
    expectation_benchmark,
    run_experiment,
    wilson_interval,
)

__all__ = [
    "AggregatorTrace",
    "ConstantExpert",
    "ConstructionError",
    "ExperimentConfig",
    "LossSpec",
    "RecordSet",
    "ReplicateRecord",
    "TwoPointConstruction",
    "backend",
    "deviation_experiment",
    "deviation_upper_check",
    "erm_exact_lower",
    "erm_upper_check",
    "expectation_benchmark",
    "run_experiment",
    "wilson_interval",
    "big_m",
    "build_trace",
    "cumulative_losses",
    "erm_gamma",
    "erm_select",
    "exp_concavity_parameter",
    "feasible_interval",
    "gamma_schedule",
    "gibbs_weights",
    "kappa",
    "make_loss",
    "mix_bound",
    "per_sequence_regret",
    "pim_predict",
    "pm_predict",
    "tau",
    "two_expert_weight",
    "verify_assumptions",
]
