"""Large deviations for linear Gaussian delay SDEs.

Mean and covariance fields by the method of steps, the rate functional,
explicit optimal transition paths, optimal escape from a disk, linear
noise approximations of nonlinear delay Langevin models and a Monte
Carlo oracle.
"""
__version__ = "0.1.0"

from .delay_model import (
    DelayModel,
    HistoryPath,
    TimeGrid,
    ValidationReport,
    build_grid,
    eval_history,
    validate_model,
)
from .errors import (
    ConditioningError,
    ConfigError,
    DomainError,
    GaussDelayError,
    InfeasibleScanError,
    NumericalError,
    ParameterError,
    RankError,
    StepSizeError,
)
from .escape import (
    EscapeProblem,
    EscapeSolution,
    boundary_optimum_fixed_T,
    discretize_disk_boundary,
    eigen_optimum_fixed_T,
    escape_optimize,
)
from .lna import (
    NonlinearDelayModel,
    StationaryState,
    ToggleParams,
    build_lna,
    find_stationary_states,
    toggle_lna,
    toggle_model,
)
from .montecarlo import (
    PathEnsemble,
    SimulationConfig,
    estimate_moments,
    exit_direction_mode,
    exit_statistics,
    simulate_linear,
    simulate_nonlinear,
    tube_probability,
)
from .rate_functional import (
    SampledPath,
    TimeScan,
    TransitionPath,
    energy_matrix,
    optimal_energy,
    optimal_path,
    path_energy,
    transition_time_scan,
)
from .steps_solver import (
    CovarianceColumn,
    CovarianceDiagonal,
    FField,
    MeanPath,
    solve_F,
    solve_covariance_column,
    solve_covariance_diagonal,
    solve_mean,
    solve_mean_analytic,
)
