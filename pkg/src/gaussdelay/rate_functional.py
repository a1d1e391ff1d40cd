"""Rate functional, explicit optimal transition paths and transition-time scans."""
from dataclasses import dataclass
import math

import numpy as np

from .delay_model import TimeGrid
from .errors import ConditioningError, ParameterError

COND_LIMIT = 1e12
# a scan whose last admissible value is within this relative distance of
# the minimum is treated as decreasing to the horizon (T_opt = inf)
HORIZON_RTOL = 1e-9
# energies this close (relative) count as ties, resolved by index order
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Path sampled on grid indices 0..T_index (values beyond T are not stored)."""

    grid: TimeGrid
    values: np.ndarray  # (T_index + 1, d)

    @property
    def T_index(self):
        return self.values.shape[0] - 1

    @property
    def T(self):
        return self.T_index * self.grid.delta

    @property
    def times(self):
        return np.arange(self.values.shape[0]) * self.grid.delta

    @property
    def start(self):
        return self.values[0]

    @property
    def end(self):
        return self.values[-1]


@dataclass(frozen=True, eq=False)
class TransitionPath:
    path: SampledPath
    energy: float
    T: float
    Q: np.ndarray


@dataclass(eq=False)
class TimeScan:
    """Optimal-path energy as a function of the terminal time.

    `energies` is NaN at excluded (ill-conditioned) times; `T_opt` is
    ``math.inf`` when the minimum sits at the right end of the scan.
    """

    times: np.ndarray
    energies: np.ndarray
    excluded: np.ndarray  # bool mask aligned with times
    index: int
    T_opt: float
    energy: float

    @property
    def at_horizon(self):
        return math.isinf(self.T_opt)


def well_conditioned(matrices, cond_limit=COND_LIMIT):
    """Mask of symmetric matrices that are positive definite with cond <= cond_limit."""
    ev = np.linalg.eigvalsh(matrices)
    lo, hi = ev[..., 0], ev[..., -1]
    return (lo > 0) & (hi <= cond_limit * np.where(lo > 0, lo, np.inf))


def _check_conditioning(rho, T):
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.T))
    if not ev[0] > 0 or ev[-1] > COND_LIMIT * ev[0]:
        cond = ev[-1] / ev[0] if ev[0] > 0 else math.inf
        raise ConditioningError(f"rho(T, T) at T={T:g} is near-singular (cond={cond:.3e})")


def first_minimum(values, rtol=TIE_RTOL):
    """Index of the first entry within relative `rtol` of the minimum (NaN ignored)."""
    flat = np.ravel(np.where(np.isnan(values), np.inf, values))
    best = flat.min()
    return int(np.flatnonzero(flat <= best + rtol * abs(best))[0])


def at_right_end(values, idx, last, rtol=HORIZON_RTOL):
    return idx == last or values[last] <= values[idx] + rtol * abs(values[idx])


def path_energy(model, mean, f):
    """Rate functional of a sampled path f for the non-centered process.

    With g = f - m (zero on [-tau, 0]), each grid interval contributes

        dt/2 * || Sigma^-1 [ (g_{j+1} - g_j)/dt - B gbar_j - C gbar_{j-N} ] ||^2,

    where gbar are trapezoid averages of the interval's end values.
    """
    model.require_full_rank()
    grid = f.grid
    if grid != mean.grid:
        raise ParameterError("path and mean live on different grids")
    J, N, dt = f.T_index, grid.N, grid.delta
    if J < 1:
        return 0.0
    g = f.values - mean.values[: J + 1]
    lagged = np.zeros_like(g)
    if J >= N:
        lagged[N:] = g[: J + 1 - N]
    slope = np.diff(g, axis=0) / dt
    state = 0.5 * (g[1:] + g[:-1])
    delayed = 0.5 * (lagged[1:] + lagged[:-1])
    drift = slope - state @ model.B.T - delayed @ model.C.T
    white = np.linalg.solve(model.Sigma, drift.T).T
    return float(0.5 * dt * np.sum(white ** 2))


def optimal_energy(mean, rho_TT, Q, T):
    """1/2 (Q - m(T)) . rho(T, T)^-1 (Q - m(T)) via a Cholesky solve."""
    j = mean.grid.index(T)
    rho = 0.5 * (np.asarray(rho_TT) + np.asarray(rho_TT).T)
    _check_conditioning(rho, T)
    r = np.asarray(Q, dtype=float) - mean.values[j]
    L = np.linalg.cholesky(rho)
    y = np.linalg.solve(L, r)
    return float(0.5 * y @ y)


def optimal_path(mean, column, rho_TT, Q):
    """Most likely path h(s) = m(s) + rho(s, T) rho(T, T)^-1 (Q - m(T)) on [0, T].

    The interpolation uses the column's own value at s = T so that the
    path ends exactly at Q; the energy uses `rho_TT`.
    """
    if column.grid != mean.grid:
        raise ParameterError("column and mean live on different grids")
    j = column.t_index
    T = column.t_fixed
    Q = np.asarray(Q, dtype=float)
    energy = optimal_energy(mean, rho_TT, Q, T)
    eta = np.linalg.solve(column.values[j], Q - mean.values[j])
    h = mean.values[: j + 1] + column.values[: j + 1] @ eta
    return TransitionPath(SampledPath(mean.grid, h), energy, T, Q.copy())


def energy_matrix(mean, diagonal, points, j_end, cond_limit=COND_LIMIT):
    """Energies E[j, k] = 1/2 (q_k - m_j) . rho_jj^-1 (q_k - m_j) for j = 0..j_end.

    Returns (E, excluded) where rows of ill-conditioned times are NaN and
    flagged in the boolean mask.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rho = diagonal.values[: j_end + 1]
    ok = well_conditioned(rho, cond_limit)
    E = np.full((j_end + 1, points.shape[0]), np.nan)
    if np.any(ok):
        L = np.linalg.cholesky(rho[ok])
        resid = points[None, :, :] - mean.values[: j_end + 1][ok][:, None, :]
        y = np.linalg.solve(L, np.swapaxes(resid, 1, 2))
        E[ok] = 0.5 * np.sum(y ** 2, axis=1)
    return E, ~ok


def transition_time_scan(mean, diagonal, Q, T_large, cond_limit=COND_LIMIT, rtol=HORIZON_RTOL):
    """Scan optimal-path energy over grid times 0 < t_j <= T_large.

    The minimiser is reported as T_opt unless the last admissible time
    matches the minimum to relative tolerance `rtol`, in which case T_opt
    is infinite. Ties go to the smaller time.
    """
    grid = diagonal.grid
    j_end = grid.horizon_index(T_large)
    E, excluded = energy_matrix(mean, diagonal, np.atleast_2d(Q), j_end, cond_limit)
    energies = E[:, 0]
    if excluded.all():
        raise ConditioningError("every scanned time has an ill-conditioned covariance")
    masked = np.where(excluded, np.inf, energies)
    idx = first_minimum(masked)
    last = int(np.flatnonzero(~excluded)[-1])
    T_opt = math.inf if at_right_end(masked, idx, last, rtol) else idx * grid.delta
    return TimeScan(grid.points[: j_end + 1], energies, excluded, idx, T_opt, float(masked[idx]))
