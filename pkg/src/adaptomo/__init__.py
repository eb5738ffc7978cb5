"""Precision limits of single-qubit state tomography.

Gill-Massar bounds, the two-step adaptive strategy, constrained maximum
likelihood and a first-order systematic-error budget for a wave-plate
measurement chain.
"""

from .bounds import (
    OptimalScheme,
    WeightingSpec,
    gm_bound_general,
    gm_bound_mse,
    gm_fisher_target,
    gm_scheme_general,
    gm_scheme_metric,
    mc_function,
    metric_weighting,
    optimal_probabilities_diagonal,
    standard_mse_theory,
)
from .estimation import (
    MeasurementEnsemble,
    fisher_information,
    gm_trace,
    maximize_likelihood,
    mle,
    quantum_fisher,
)
from .harness import ExperimentPlan, FigureOfMerit, SimulationReport, StrategyEntry, figure_of_merit, run_plan
from .qubit import (
    BlochState,
    MeasurementRecord,
    PauliAxis,
    born_probabilities,
    bures_distance_sq,
    fidelity,
    rotation_to_z,
    sample_counts,
)
from .strategies import StrategyConfig, TrialResult, allocate_counts, run_adaptive, run_known_state, run_standard

__version__ = "0.1.0"
