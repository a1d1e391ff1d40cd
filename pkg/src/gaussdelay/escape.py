"""Optimal escape from a disk around a metastable state (two-dimensional models)."""
from dataclasses import dataclass
import math

import numpy as np

from .delay_model import build_grid
from .errors import InfeasibleScanError, ParameterError
from .rate_functional import (
    _check_conditioning,
    at_right_end,
    energy_matrix,
    first_minimum,
    optimal_path,
)
from .steps_solver import (
    solve_F,
    solve_covariance_column,
    solve_covariance_diagonal,
    solve_mean,
)

HALVES = ("both", "upper", "lower")


@dataclass(frozen=True)
class EscapeProblem:
    """Disk D of radius R around `center`, scanned up to T_large with N steps per delay.

    `half` restricts the exit points to the upper (y >= w) or lower (y <= w)
    half of the boundary.
    """

    center: tuple
    R: float
    delta_r: float
    T_large: float
    N: int = 500
    half: str = "both"

    def __post_init__(self):
        if not self.R > 0:
            raise ParameterError(f"disk radius must be positive, got {self.R!r}")
        if not 0 < self.delta_r <= self.R:
            raise ParameterError(f"delta_r must lie in (0, R], got {self.delta_r!r}")
        if not self.T_large > 0:
            raise ParameterError(f"T_large must be positive, got {self.T_large!r}")
        if self.half not in HALVES:
            raise ParameterError(f"half must be one of {HALVES}, got {self.half!r}")
        if len(self.center) != 2:
            raise ParameterError("disk exit problems are two-dimensional")


@dataclass(eq=False)
class EnergyMatrix:
    times: np.ndarray  # (J,)
    points: np.ndarray  # (K, 2)
    values: np.ndarray  # (J, K), NaN on excluded rows
    excluded: np.ndarray  # (J,) bool


@dataclass(eq=False)
class EscapeSolution:
    T_opt: float  # math.inf when the scan minimum sits at the horizon
    T_index: int  # grid row of the energy-matrix minimum
    q_hat: np.ndarray
    path: object  # TransitionPath
    energy: float
    matrix: EnergyMatrix
    mean: object = None
    diagonal: object = None

    @property
    def at_horizon(self):
        return math.isinf(self.T_opt)


def _abscissas(R, delta_r):
    ratio = 2 * R / delta_r
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = int(math.floor(ratio))
        x = -R + delta_r * np.arange(n + 1)
        return np.append(x, R) if x[-1] < R else x
    x = -R + delta_r * np.arange(n + 1)
    x[-1] = R
    return x


def discretize_disk_boundary(center, R, delta_r, half="both"):
    """Boundary points of the disk from a uniform split of [-R, R].

    Each abscissa x gives (v + x, w + sqrt(R^2 - x^2)) on the upper branch;
    the lower branch repeats the interior abscissas with the opposite sign.
    Order: upper branch by increasing x, then lower branch by increasing x.
    """
    if not R > 0:
        raise ParameterError(f"R must be positive, got {R!r}")
    if not 0 < delta_r <= R:
        raise ParameterError(f"delta_r must lie in (0, R], got {delta_r!r}")
    if half not in HALVES:
        raise ParameterError(f"half must be one of {HALVES}, got {half!r}")
    v, w = (float(c) for c in center)
    x = _abscissas(float(R), float(delta_r))
    y = np.sqrt(np.maximum(R * R - x * x, 0.0))
    upper = np.column_stack([x, y])
    lower = np.column_stack([x, -y])
    if half == "upper":
        pts = upper
    elif half == "lower":
        pts = lower
    else:
        pts = np.vstack([upper, lower[1:-1]])
    return pts + np.array([v, w])


def boundary_optimum_fixed_T(mean, rho_TT, points, T):
    """Brute-force minimum of the optimal-path energy over candidate exit points."""
    j = mean.grid.index(T)
    rho = 0.5 * (np.asarray(rho_TT) + np.asarray(rho_TT).T)
    _check_conditioning(rho, T)
    L = np.linalg.cholesky(rho)
    y = np.linalg.solve(L, (np.asarray(points, dtype=float) - mean.values[j]).T)
    energies = 0.5 * np.sum(y ** 2, axis=0)
    k = first_minimum(energies)
    return np.asarray(points[k], dtype=float), float(energies[k])


def eigen_optimum_fixed_T(rho_TT, R, center=(0.0, 0.0), mean_T=None):
    """Exact boundary optimum when m(T) equals the disk centre.

    The exit direction is the top eigenvector of rho(T, T) (the bottom one
    of its inverse), oriented towards positive second coordinate; the
    energy is R^2 / (2 lambda_max(rho(T, T))).
    """
    center = np.asarray(center, dtype=float)
    if mean_T is not None:
        gap = np.linalg.norm(np.asarray(mean_T, dtype=float) - center)
        if gap > 1e-8 * max(1.0, R):
            raise ParameterError(
                f"m(T) is {gap:.3e} away from the disk centre; use boundary_optimum_fixed_T"
            )
    rho = 0.5 * (np.asarray(rho_TT) + np.asarray(rho_TT).T)
    evals, evecs = np.linalg.eigh(rho)
    if not evals[0] > 0:
        raise ParameterError("rho(T, T) must be positive definite")
    direction = evecs[:, -1]
    lead = direction[1] if abs(direction[1]) > 1e-15 else direction[0]
    if lead < 0:
        direction = -direction
    return center + R * direction, float(0.5 * R * R / evals[-1])


def escape_optimize(model, history, problem, f_method="translation"):
    """Optimal exit time, exit point and escape path from the disk.

    1. solve the mean and the covariance diagonal up to T_large;
    2. discretise the boundary;
    3. fill E[j, k] = 1/2 (q_k - m_j) . rho_jj^-1 (q_k - m_j);
    4. take the global minimum (ties: smaller time, then boundary order);
    5. rebuild the path from one covariance column at the optimal time.
    """
    if model.dim != 2:
        raise ParameterError("disk exit problems need a two-dimensional model")
    model.require_full_rank()
    grid = build_grid(model.tau, problem.T_large, problem.N)
    mean = solve_mean(model, history, grid)
    F = solve_F(model, grid, method=f_method)
    diagonal = solve_covariance_diagonal(model, F, grid)
    points = discretize_disk_boundary(problem.center, problem.R, problem.delta_r, problem.half)

    j_end = grid.horizon_index(problem.T_large)
    E, excluded = energy_matrix(mean, diagonal, points, j_end)
    if excluded.all():
        raise InfeasibleScanError("every scanned time was excluded by the conditioning filter")
    masked = np.where(np.isnan(E), np.inf, E)
    flat = first_minimum(masked)
    j, k = divmod(flat, E.shape[1])
    row_min = masked.min(axis=1)
    last = int(np.flatnonzero(~excluded)[-1])
    if at_right_end(row_min, j, last):
        T_opt = math.inf
    else:
        T_opt = j * grid.delta
    q_hat = points[k]
    column = solve_covariance_column(model, F, j * grid.delta)
    path = optimal_path(mean, column, diagonal.values[j], q_hat)
    matrix = EnergyMatrix(grid.points[: j_end + 1], points, E, excluded)
    return EscapeSolution(T_opt, j, q_hat, path, float(masked[j, k]), matrix, mean, diagonal)

