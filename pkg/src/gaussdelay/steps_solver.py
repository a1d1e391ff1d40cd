"""Method-of-steps solvers for the mean, the F(s, t) family and the covariance field.

All three delay ODEs are marched with backward Euler on the grid
t_j = j * tau / N, so every interval [k tau, (k+1) tau] is resolved by
exactly N implicit steps whose delayed term is already known:

    m(t)      = (I - dt B)^-1 m(t - dt) + dt (I - dt B)^-1 [a + C m(t - tau)]
    rho(s, t) = (I - ds B)^-1 rho(s - ds, t)
                + ds (I - ds B)^-1 [C rho(s - tau, t) + Sigma F(s, t)]

F(s, t) = dG/ds with G(s, t) = E[W_s Z_t^T] is obtained from the regular
function phi_s(t) = F(s, t) + Sigma^T H(s - t) (H(0) = 1), which solves a
delay ODE in t with bounded forcing.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .delay_model import TimeGrid, require_compatible
from .errors import ParameterError, StepSizeError

# largest dense F table we agree to materialise (entries)
DENSE_F_LIMIT = 60_000_000


@dataclass(frozen=True, eq=False)
class MeanPath:
    grid: TimeGrid
    values: np.ndarray  # (M + 1, d), row 0 is gamma(0)

    @property
    def times(self):
        return self.grid.points

    def at(self, t):
        return self.values[self.grid.index(t)]


@dataclass(frozen=True, eq=False)
class FField:
    """F(s_i, t_j) on the grid.

    Stored either as a translation table ``table[k] = F(s, s + k dt)``
    (constant coefficients make F a function of t - s on the grid) or as a
    dense ``(M+1, M+1, d, d)`` array for validation runs.
    """

    grid: TimeGrid
    table: np.ndarray = None
    dense: np.ndarray = None

    @property
    def dim(self):
        src = self.table if self.table is not None else self.dense
        return src.shape[-1]

    def value(self, i, j):
        if self.dense is not None:
            return self.dense[i, j]
        if j < i:
            return np.zeros((self.dim, self.dim))
        return self.table[j - i]

    def column(self, j):
        """F(s_i, t_j) for every grid index i, shape (M + 1, d, d)."""
        if self.dense is not None:
            return self.dense[:, j]
        out = np.zeros((self.grid.M + 1, self.dim, self.dim))
        out[: j + 1] = self.table[j::-1]
        return out


@dataclass(frozen=True, eq=False)
class CovarianceDiagonal:
    """rho(t_j, t_j) for every grid index (symmetric part of the scheme's output)."""

    grid: TimeGrid
    values: np.ndarray  # (M + 1, d, d)

    @property
    def times(self):
        return self.grid.points

    def at(self, t):
        return self.values[self.grid.index(t)]

    def variances(self):
        return np.einsum("jii->ji", self.values)

    def min_inverse_eigenvalue(self):
        """Smallest eigenvalue of rho(t, t)^-1, i.e. 1 / largest eigenvalue of rho(t, t).

        Infinite where rho(t, t) vanishes (t = 0).
        """
        top = np.linalg.eigvalsh(self.values)[:, -1]
        with np.errstate(divide="ignore"):
            return np.where(top > 0, 1.0 / np.where(top > 0, top, 1.0), np.inf)


@dataclass(frozen=True, eq=False)
class CovarianceColumn:
    grid: TimeGrid
    t_index: int
    values: np.ndarray  # (M + 1, d, d): rho(s_i, t_fixed)

    @property
    def t_fixed(self):
        return self.t_index * self.grid.delta


def _implicit_inverse(B, dt):
    A = np.eye(B.shape[0]) - dt * B
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise StepSizeError(
            f"I - dt*B is singular to working precision (cond={cond:.3e}); use a smaller step (larger N)"
        )
    return np.linalg.inv(A)


def _check_grid(model, grid):
    if abs(grid.tau - model.tau) > 1e-12 * model.tau:
        raise ParameterError(f"grid delay {grid.tau} does not match model delay {model.tau}")


def solve_mean(model, history, grid):
    """Backward-Euler mean path m(t_j), j = 0..M."""
    require_compatible(model, history)
    _check_grid(model, grid)
    N, M, dt = grid.N, grid.M, grid.delta
    Ainv = _implicit_inverse(model.B, dt)
    a, C = model.a, model.C
    # delayed values on the first interval come from the history
    lagged = history(np.arange(1, N + 1) * dt - model.tau)
    m = np.empty((M + 1, model.dim))
    m[0] = history.start
    for j in range(1, M + 1):
        delayed = lagged[j - 1] if j <= N else m[j - N]
        m[j] = Ainv @ (m[j - 1] + dt * (a + C @ delayed))
    return MeanPath(grid, m)


def solve_mean_analytic(model, history, grid):
    """Stepwise exponential solution of the mean delay ODE.

    On each interval J_k = [k tau, (k+1) tau]

        m(t) = e^{(t - k tau) B} [ int_{k tau}^t e^{-(u - k tau) B} (a + C m(u - tau)) du + m(k tau) ],

    with the integral evaluated by the composite trapezoid rule on the grid.
    Independent of `solve_mean` apart from sharing the grid.
    """
    require_compatible(model, history)
    _check_grid(model, grid)
    N, M, dt = grid.N, grid.M, grid.delta
    B, C, a = model.B, model.C, model.a
    offsets = np.arange(N + 1) * dt
    fwd = np.array([expm(s * B) for s in offsets])
    bwd = np.array([expm(-s * B) for s in offsets])

    m = np.empty((M + 1, model.dim))
    m[0] = history.start
    for k in range(M // N):
        base = k * N
        if k == 0:
            delayed = history(offsets - model.tau)
        else:
            delayed = m[base - N: base + 1]
        g = np.einsum("iab,ib->ia", bwd, a + delayed @ C.T)
        integral = np.zeros_like(g)
        integral[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)
        m[base: base + N + 1] = np.einsum("iab,ib->ia", fwd, integral + m[base])
    return MeanPath(grid, m)


def _phi_translation_table(model, grid, Ainv):
    """phi_0(t_j) for j = 0..M, marched in t by backward Euler.

    For s = 0 the forcing is theta_0(t) = -Sigma^T C^T on (0, tau] and 0
    afterwards; phi_0 = Sigma^T on [-tau, 0].
    """
    N, M, dt = grid.N, grid.M, grid.delta
    St = model.Sigma.T
    Ct = model.C.T
    AinvT = Ainv.T
    phi = np.empty((M + 1, model.dim, model.dim))
    phi[0] = St
    for j in range(1, M + 1):
        rhs = phi[j - 1]
        # for t <= tau the delayed value Sigma^T C^T cancels the forcing
        if j > N:
            rhs = rhs + dt * (phi[j - N] @ Ct)
        phi[j] = rhs @ AinvT
    return phi


def _phi_dense(model, grid, Ainv):
    """phi_s(t_j) for all grid s at once, shape (M+1 [s], M+1 [t], d, d)."""
    N, M, dt = grid.N, grid.M, grid.delta
    d = model.dim
    St = model.Sigma.T
    StBt = St @ model.B.T
    StCt = St @ model.C.T
    AinvT = Ainv.T
    s_idx = np.arange(M + 1)
    phi = np.empty((M + 1, M + 1, d, d))
    phi[:, 0] = St
    for j in range(1, M + 1):
        past = phi[:, j - N] if j - N > 0 else np.broadcast_to(St, (M + 1, d, d))
        h_now = (s_idx >= j)[:, None, None]
        h_lag = (s_idx - j + N >= 0)[:, None, None]
        theta = -StBt * h_now - StCt * h_lag
        phi[:, j] = (phi[:, j - 1] + dt * (past @ model.C.T + theta)) @ AinvT
    return phi


def solve_F(model, grid, method="translation"):
    """Solve the phi_s family and recover F(s, t) = phi_s(t) - Sigma^T H(s - t).

    ``method="translation"`` marches phi_0 only and uses the exact
    translation property of the constant-coefficient scheme,
    F(s_i, t_j) = F(0, t_{j-i}); ``method="direct"`` marches every phi_s
    jointly and keeps the dense table (small grids only).
    """
    model.require_valid()
    _check_grid(model, grid)
    Ainv = _implicit_inverse(model.B, grid.delta)
    St = model.Sigma.T
    if method == "translation":
        table = _phi_translation_table(model, grid, Ainv)
        table[0] -= St  # H(0) = 1 on the diagonal
        return FField(grid, table=table)
    if method == "direct":
        size = (grid.M + 1) ** 2 * model.dim ** 2
        if size > DENSE_F_LIMIT:
            raise ParameterError(
                f"dense F would hold {size} entries; use method='translation' for grids this large"
            )
        phi = _phi_dense(model, grid, Ainv)
        i = np.arange(grid.M + 1)
        phi -= (i[:, None] >= i[None, :])[:, :, None, None] * St
        return FField(grid, dense=phi)
    raise ParameterError(f"unknown method {method!r}")


def _march_column(Ainv, C, Sigma, forcing, N, dt):
    """rho_i = Ainv (rho_{i-1} + dt (C rho_{i-N} + Sigma F_i)), rho_{<=0} = 0."""
    M = forcing.shape[0] - 1
    rho = np.zeros_like(forcing)
    SF = Sigma @ forcing
    for i in range(1, M + 1):
        acc = rho[i - 1] + dt * SF[i]
        if i > N:
            acc = acc + dt * (C @ rho[i - N])
        rho[i] = Ainv @ acc
    return rho


def solve_covariance_column(model, F, t_fixed):
    """Column s -> rho(s, t_fixed) on the whole grid."""
    model.require_valid()
    grid = F.grid
    _check_grid(model, grid)
    j = grid.index(t_fixed)
    Ainv = _implicit_inverse(model.B, grid.delta)
    rho = _march_column(Ainv, model.C, model.Sigma, F.column(j), grid.N, grid.delta)
    return CovarianceColumn(grid, j, rho)


def _impulse_response(Ainv, C, N, M, dt):
    """K_0 = Ainv, K_k = Ainv K_{k-1} + dt Ainv C K_{k-N}: the s-recursion's kernel."""
    d = Ainv.shape[0]
    K = np.empty((M + 1, d, d))
    K[0] = Ainv
    AC = dt * Ainv @ C
    for k in range(1, M + 1):
        K[k] = Ainv @ K[k - 1]
        if k >= N:
            K[k] += AC @ K[k - N]
    return K


def solve_covariance_diagonal(model, F, grid=None, method="auto"):
    """rho(t_j, t_j) for every grid index.

    With a translation-table F the column recursion is linear and
    shift-invariant in s, so its value on the diagonal is the streamed sum

        rho(t_j, t_j) = dt * sum_{k<j} K_k Sigma F(0, t_k),

    where K is the recursion's impulse response. This equals the
    per-column march exactly (up to rounding) at O(M) cost.
    ``method="columns"`` runs the per-column march for every t_j instead.

    The scheme's output carries an O(dt) antisymmetric part; the stored
    matrices are its symmetric part.
    """
    model.require_valid()
    grid = F.grid if grid is None else grid
    _check_grid(model, grid)
    if grid != F.grid:
        raise ParameterError("F was computed on a different grid")
    Ainv = _implicit_inverse(model.B, grid.delta)
    if method == "auto":
        method = "stream" if F.table is not None else "columns"
    if method == "stream":
        if F.table is None:
            raise ParameterError("streamed diagonal needs a translation-table F")
        K = _impulse_response(Ainv, model.C, grid.N, grid.M, grid.delta)
        terms = grid.delta * (K @ model.Sigma @ F.table)
        raw = np.zeros_like(terms)
        raw[1:] = np.cumsum(terms[:-1], axis=0)
    elif method == "columns":
        raw = np.zeros((grid.M + 1, model.dim, model.dim))
        for j in range(1, grid.M + 1):
            col = _march_column(Ainv, model.C, model.Sigma, F.column(j), grid.N, grid.delta)
            raw[j] = col[j]
    else:
        raise ParameterError(f"unknown method {method!r}")
    sym = 0.5 * (raw + np.swapaxes(raw, 1, 2))
    return CovarianceDiagonal(grid, sym)
