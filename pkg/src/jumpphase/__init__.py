"""Geometric phases of quantum-jump trajectories.

Unravels a Lindblad master equation into stochastic pure-state trajectories,
evaluates the Pancharatnam phase along each one (smooth drift, jump phases,
geodesic closure), and cross-checks the ensemble average against a direct
master-equation integration.
"""

from .linalg import (IDENTITY2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y,
                     SIGMA_Z, dagger, expectation, inner, mat_exp, norm,
                     normalize)
from .model import (LindbladModel, StepOperators, effective_hamiltonian,
                    is_unital, jump_probabilities, step_operators)
from .trajectory import (EnsembleResult, JumpEvent, NormCollapseError,
                         TrajectoryRecord, TrajectorySummary, no_jump_propagate,
                         run_ensemble, run_prescribed, run_trajectory,
                         trajectory_seed)
from .phase import (DiscreteConvergence, PhaseBreakdown, PhaseStatistics,
                    PhaseUndefinedError, circular_distance,
                    discrete_vs_continuous, ensemble_phase_statistics,
                    no_jump_phase, pancharatnam_discrete, trajectory_phase,
                    wrap_angle)
from .master import compare_ensemble, integrate, lindblad_rhs, trace_distance
from .spin import (AreaDecomposition, BlochPath, SpinHalfConfig,
                   bloch_from_state, bloch_path_from_record, build_model,
                   decay_no_jump_reference, dephasing_phase, flip_partial_areas,
                   initial_state, preset, solid_angle)
from .config import ConfigError, RunConfig, load_run_config, parse_run_config

__version__ = "0.1.0"

__all__ = [
    "IDENTITY2", "SIGMA_MINUS", "SIGMA_PLUS", "SIGMA_X", "SIGMA_Y", "SIGMA_Z",
    "dagger", "expectation", "inner", "mat_exp", "norm", "normalize",
    "LindbladModel", "StepOperators", "effective_hamiltonian", "is_unital",
    "jump_probabilities", "step_operators",
    "EnsembleResult", "JumpEvent", "NormCollapseError", "TrajectoryRecord",
    "TrajectorySummary", "no_jump_propagate", "run_ensemble", "run_prescribed",
    "run_trajectory", "trajectory_seed",
    "DiscreteConvergence", "PhaseBreakdown", "PhaseStatistics",
    "PhaseUndefinedError", "circular_distance", "discrete_vs_continuous",
    "ensemble_phase_statistics", "no_jump_phase", "pancharatnam_discrete",
    "trajectory_phase", "wrap_angle",
    "compare_ensemble", "integrate", "lindblad_rhs", "trace_distance",
    "AreaDecomposition", "BlochPath", "SpinHalfConfig", "bloch_from_state",
    "bloch_path_from_record", "build_model", "decay_no_jump_reference",
    "dephasing_phase", "flip_partial_areas", "initial_state", "preset",
    "solid_angle",
    "ConfigError", "RunConfig", "load_run_config", "parse_run_config",
    "__version__",
]
